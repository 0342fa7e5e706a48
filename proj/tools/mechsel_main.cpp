#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mechsel/experiment.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mechsel::ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_mode(mechsel::RunMode mode, const std::string& config_path, const std::string& scenario,
             const std::vector<std::uint64_t>& seeds, int epsilon, int epochs,
             const std::string& out_dir, bool protect_structural) {
  mechsel::ExperimentConfig cfg =
      config_path.empty() ? mechsel::ExperimentConfig{} : mechsel::parse_config(slurp(config_path));

  if (!scenario.empty()) {
    if (scenario == "full") {
      cfg.scenario = mechsel::Scenario::Full;
      cfg.window_lo = 0.0;
      cfg.window_hi = 20.0;
    } else {
      cfg.scenario = mechsel::Scenario::Late;
      cfg.window_lo = 10.0;
      cfg.window_hi = 20.0;
    }
  }
  if (!seeds.empty()) cfg.seeds = seeds;
  if (epsilon > 0) cfg.epsilon = epsilon;
  if (epochs > 0) cfg.hyper.epochs = epochs;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (protect_structural) cfg.protect_structural = true;

  const auto results = mechsel::run_experiment(cfg, mode);
  bool any_ok = false;
  for (const auto& r : results) {
    if (r.ok) {
      any_ok = true;
      std::cout << "ok    seed " << r.seed << "  " << r.dir.string() << "\n";
    } else {
      std::cout << "FAIL  seed " << r.seed << "  " << r.dir.string() << "  (" << r.error << ")\n";
    }
  }
  return any_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mechsel: mechanism selection for the two-species competition model"};
  app.require_subcommand(1);

  std::string config_path;
  std::string scenario;
  std::vector<std::uint64_t> seeds;
  int epsilon = 0;
  int epochs = 0;
  std::string out_dir;
  bool protect_structural = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--scenario", scenario, "data window: full ([0,20]) or late ([10,20])")
        ->check(CLI::IsMember({"full", "late"}));
    cmd->add_option("--seed", seeds, "run seed, repeatable");
    cmd->add_option("--epsilon", epsilon, "stop once at most this many parameters stay active")
        ->check(CLI::Range(1, 15));
    cmd->add_option("--epochs", epochs, "training epochs per fit")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_flag("--protect-structural", protect_structural,
                  "never eliminate r, a1, a2, b1, b2");
  };

  CLI::App* fit_cmd = app.add_subcommand("direct-fit", "fit the base model parameters directly");
  CLI::App* sel_cmd = app.add_subcommand("select", "iteratively eliminate the weakest mechanisms");
  add_common(fit_cmd);
  add_common(sel_cmd);

  std::string report_dir;
  CLI::App* rep_cmd = app.add_subcommand("report", "summarize completed runs");
  rep_cmd->add_option("--out", report_dir, "directory holding run subdirectories")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (rep_cmd->parsed()) {
      mechsel::emit_report(report_dir, std::cout);
      return 0;
    }
    const auto mode =
        fit_cmd->parsed() ? mechsel::RunMode::DirectFit : mechsel::RunMode::Selection;
    return run_mode(mode, config_path, scenario, seeds, epsilon, epochs, out_dir,
                    protect_structural);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
