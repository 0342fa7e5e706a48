#include "mechsel/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace mechsel {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string fmt6(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "scenario",    "window",        "r",
      "a1",          "a2",            "b1",
      "b2",          "u0",            "v0",
      "n_points",    "epsilon",       "epochs",
      "batch_size",  "learning_rate", "adam_beta1",
      "adam_beta2",  "adam_eps",      "data_weight",
      "residual_weight", "nonnegativity", "protect_structural",
      "zero_tol",    "out_dir",       "seeds",
  };
  return keys;
}

double get_number(const json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError("config: key '" + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError("config: key '" + key + "' must be an integer");
  return v.get<int>();
}

bool get_bool(const json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError("config: key '" + key + "' must be a boolean");
  return v.get<bool>();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::Full: return "full";
    case Scenario::Late: return "late";
    case Scenario::Custom: return "custom";
  }
  return "?";
}

std::string_view to_string(RunMode m) {
  return m == RunMode::DirectFit ? "direct-fit" : "select";
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: document must be a flat JSON object");

  for (const auto& [key, _] : j.items()) {
    if (!known_keys().count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }

  ExperimentConfig cfg;

  if (j.contains("scenario")) {
    const auto& v = j.at("scenario");
    if (!v.is_string()) throw ConfigError("config: key 'scenario' must be a string");
    const std::string s = v.get<std::string>();
    if (s == "full") {
      cfg.scenario = Scenario::Full;
    } else if (s == "late") {
      cfg.scenario = Scenario::Late;
    } else if (s == "custom") {
      cfg.scenario = Scenario::Custom;
    } else {
      throw ConfigError("config: key 'scenario' must be one of full|late|custom");
    }
  }

  switch (cfg.scenario) {
    case Scenario::Full:
      cfg.window_lo = 0.0;
      cfg.window_hi = 20.0;
      break;
    case Scenario::Late:
      cfg.window_lo = 10.0;
      cfg.window_hi = 20.0;
      break;
    case Scenario::Custom:
      if (!j.contains("window")) {
        throw ConfigError("config: missing required key 'window' for scenario 'custom'");
      }
      break;
  }
  if (j.contains("window")) {
    if (cfg.scenario != Scenario::Custom) {
      throw ConfigError("config: key 'window' is only valid for scenario 'custom'");
    }
    const auto& v = j.at("window");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError("config: key 'window' must be [lo, hi]");
    }
    cfg.window_lo = v[0].get<double>();
    cfg.window_hi = v[1].get<double>();
    if (!(cfg.window_lo >= kTimeLo) || !(cfg.window_hi <= kTimeHi) || !(cfg.window_lo < cfg.window_hi)) {
      throw ConfigError("config: key 'window' must satisfy 0 <= lo < hi <= 20");
    }
  }

  struct NumField {
    const char* key;
    double* dst;
    double lo;
    double hi;
  };
  const NumField fields[] = {
      {"r", &cfg.truth.r, 1e-12, 1e6},
      {"a1", &cfg.truth.a1, 1e-12, 1e6},
      {"a2", &cfg.truth.a2, 1e-12, 1e6},
      {"b1", &cfg.truth.b1, 1e-12, 1e6},
      {"b2", &cfg.truth.b2, 1e-12, 1e6},
      {"u0", &cfg.initial.u, -1e6, 1e6},
      {"v0", &cfg.initial.v, -1e6, 1e6},
      {"learning_rate", &cfg.hyper.learning_rate, 1e-12, 1e3},
      {"adam_beta1", &cfg.hyper.adam_beta1, 0.0, 1.0 - 1e-12},
      {"adam_beta2", &cfg.hyper.adam_beta2, 0.0, 1.0 - 1e-12},
      {"adam_eps", &cfg.hyper.adam_eps, 1e-300, 1.0},
      {"data_weight", &cfg.hyper.data_weight, 0.0, 1e9},
      {"residual_weight", &cfg.hyper.residual_weight, 0.0, 1e9},
      {"zero_tol", &cfg.zero_tol, 0.0, 1.0},
  };
  for (const NumField& f : fields) {
    if (!j.contains(f.key)) continue;
    const double x = get_number(j, f.key);
    if (!std::isfinite(x) || x < f.lo || x > f.hi) {
      throw ConfigError(std::string("config: key '") + f.key + "' is out of range");
    }
    *f.dst = x;
  }

  if (j.contains("n_points")) {
    cfg.n_points = get_int(j, "n_points");
    if (cfg.n_points < 0) throw ConfigError("config: key 'n_points' must be >= 0");
  }
  if (j.contains("epsilon")) {
    cfg.epsilon = get_int(j, "epsilon");
    if (cfg.epsilon < 1 || cfg.epsilon > kNumParams) {
      throw ConfigError("config: key 'epsilon' must be in [1, 15]");
    }
  }
  if (j.contains("epochs")) {
    cfg.hyper.epochs = get_int(j, "epochs");
    if (cfg.hyper.epochs < 1) throw ConfigError("config: key 'epochs' must be >= 1");
  }
  if (j.contains("batch_size")) {
    cfg.hyper.batch_size = get_int(j, "batch_size");
    if (cfg.hyper.batch_size < 1) throw ConfigError("config: key 'batch_size' must be >= 1");
  }
  if (j.contains("nonnegativity")) cfg.hyper.nonnegativity = get_bool(j, "nonnegativity");
  if (j.contains("protect_structural")) cfg.protect_structural = get_bool(j, "protect_structural");
  if (j.contains("out_dir")) {
    const auto& v = j.at("out_dir");
    if (!v.is_string()) throw ConfigError("config: key 'out_dir' must be a string");
    cfg.out_dir = v.get<std::string>();
  }
  if (j.contains("seeds")) {
    const auto& v = j.at("seeds");
    if (!v.is_array() || v.empty()) throw ConfigError("config: key 'seeds' must be a nonempty array");
    cfg.seeds.clear();
    for (const auto& s : v) {
      if (!s.is_number_unsigned() && !s.is_number_integer()) {
        throw ConfigError("config: key 'seeds' must hold nonnegative integers");
      }
      const auto val = s.get<std::int64_t>();
      if (val < 0) throw ConfigError("config: key 'seeds' must hold nonnegative integers");
      cfg.seeds.push_back(static_cast<std::uint64_t>(val));
    }
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["scenario"] = std::string(to_string(cfg.scenario));
  if (cfg.scenario == Scenario::Custom) j["window"] = {cfg.window_lo, cfg.window_hi};
  j["r"] = cfg.truth.r;
  j["a1"] = cfg.truth.a1;
  j["a2"] = cfg.truth.a2;
  j["b1"] = cfg.truth.b1;
  j["b2"] = cfg.truth.b2;
  j["u0"] = cfg.initial.u;
  j["v0"] = cfg.initial.v;
  j["n_points"] = cfg.n_points;
  j["epsilon"] = cfg.epsilon;
  j["epochs"] = cfg.hyper.epochs;
  j["batch_size"] = cfg.hyper.batch_size;
  j["learning_rate"] = cfg.hyper.learning_rate;
  j["adam_beta1"] = cfg.hyper.adam_beta1;
  j["adam_beta2"] = cfg.hyper.adam_beta2;
  j["adam_eps"] = cfg.hyper.adam_eps;
  j["data_weight"] = cfg.hyper.data_weight;
  j["residual_weight"] = cfg.hyper.residual_weight;
  j["nonnegativity"] = cfg.hyper.nonnegativity;
  j["protect_structural"] = cfg.protect_structural;
  j["zero_tol"] = cfg.zero_tol;
  j["out_dir"] = cfg.out_dir;
  j["seeds"] = cfg.seeds;
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json dataset_summary(const Dataset& ds) {
  json s;
  s["window"] = {ds.window_lo, ds.window_hi};
  s["count"] = ds.points.size();
  s["includes_initial"] = ds.includes_initial;
  s["initial"] = {ds.points.front().t, ds.points.front().u, ds.points.front().v};
  const std::size_t interior = ds.points.size() - 1;
  s["n_interior"] = interior;
  if (interior > 0) {
    s["interior_t_min"] = ds.points[1].t;
    s["interior_t_max"] = ds.points.back().t;
  }
  return s;
}

std::string loss_history_csv(const std::vector<LossBreakdown>& history) {
  std::string out = "epoch,data_mse,residual_mse,total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    out += std::to_string(e + 1);
    out += ',';
    out += fmt6(history[e].data_mse);
    out += ',';
    out += fmt6(history[e].residual_mse);
    out += ',';
    out += fmt6(history[e].total);
    out += '\n';
  }
  return out;
}

std::string trajectory_tsv(const Trajectory& traj) {
  std::ostringstream out;
  write_trajectory_tsv(out, traj);
  return out.str();
}

// One run; throws on hard failures, which the caller records.
void run_one(const ExperimentConfig& cfg, RunMode mode, std::uint64_t seed, const fs::path& dir,
             json& manifest) {
  const ParameterState truth_state = ParameterState::base_only(cfg.truth);
  const Dataset data =
      generate_dataset(truth_state, cfg.initial, cfg.window_lo, cfg.window_hi, cfg.n_points);
  const Trajectory truth_traj = integrate(truth_state, cfg.initial, kTimeLo, kTimeHi, kDefaultStep);
  const std::vector<double> grid = standard_mse_grid();

  manifest["dataset_summary"] = dataset_summary(data);

  HyperParams hyper = cfg.hyper;
  hyper.seed = seed;

  json results;
  std::vector<std::string> outputs;

  if (mode == RunMode::DirectFit) {
    const FitResult fr = fit(ParameterState::base_only(cfg.truth), data, hyper);
    if (fr.failed) throw NumericalOverflowError("fit failed: " + fr.failure);

    std::string params_csv = "name,value\n";
    json params;
    for (int i = kGrowthR; i <= kB2; ++i) {
      params_csv += std::string(param_name(i)) + "," + fmt6(fr.fitted.value(i)) + "\n";
      params[std::string(param_name(i))] = fr.fitted.value(i);
    }
    write_text_file(dir / "fit_params.csv", params_csv);
    outputs.push_back("fit_params.csv");
    write_text_file(dir / "loss_history.csv", loss_history_csv(fr.loss_history));
    outputs.push_back("loss_history.csv");

    results["params"] = std::move(params);
    results["final_loss"] = {{"data_mse", fr.loss_history.back().data_mse},
                             {"residual_mse", fr.loss_history.back().residual_mse},
                             {"total", fr.loss_history.back().total}};
    try {
      const Trajectory learned = integrate(fr.fitted, cfg.initial, kTimeLo, kTimeHi, kDefaultStep);
      results["trajectory_mse"] = trajectory_mse(learned, truth_traj, grid);
    } catch (const BlowUpError&) {
      results["trajectory_mse"] = nullptr;
      results["trajectory_blow_up"] = true;
    }
  } else {
    const ParamMask prot = cfg.protect_structural ? structural_protection() : no_protection();
    const SelectionTrace trace =
        run_selection(ParameterState::full_family(cfg.truth), data, cfg.epsilon, hyper, prot,
                      truth_traj, std::string(to_string(cfg.scenario)), cfg.zero_tol);

    std::ostringstream trace_csv;
    write_trace_csv(trace_csv, trace);
    write_text_file(dir / "trace.csv", trace_csv.str());
    outputs.push_back("trace.csv");

    std::string mse_csv = "step,mse\n";
    json mse_series = json::array();
    for (const SelectionStepRecord& rec : trace.steps) {
      mse_csv += std::to_string(rec.step) + "," + fmt6(rec.trajectory_mse) + "\n";
      json entry;
      entry["step"] = rec.step;
      if (std::isfinite(rec.trajectory_mse)) {
        entry["mse"] = rec.trajectory_mse;
      } else {
        entry["mse"] = nullptr;
      }
      entry["blow_up"] = rec.mse_blow_up;
      mse_series.push_back(std::move(entry));
    }
    write_text_file(dir / "mse_series.csv", mse_csv);
    outputs.push_back("mse_series.csv");

    write_text_file(dir / "trajectory_truth.tsv", trajectory_tsv(truth_traj));
    outputs.push_back("trajectory_truth.tsv");
    try {
      const Trajectory learned =
          integrate(trace.final_state, cfg.initial, kTimeLo, kTimeHi, kDefaultStep);
      write_text_file(dir / "trajectory_learned.tsv", trajectory_tsv(learned));
    } catch (const BlowUpError&) {
      Trajectory stub;
      stub.times.push_back(0.0);
      stub.states.push_back(cfg.initial);
      stub.derivs.push_back(Deriv{});
      write_text_file(dir / "trajectory_learned.tsv", trajectory_tsv(stub));
      results["learned_trajectory_blow_up"] = true;
    }
    outputs.push_back("trajectory_learned.tsv");

    const bool any_failed =
        std::any_of(trace.steps.begin(), trace.steps.end(),
                    [](const SelectionStepRecord& r) { return r.fit_failed; });
    if (any_failed) throw NumericalOverflowError("selection: a fit step failed");

    results["trace"] = trace_to_json(trace);
    results["mse_series"] = std::move(mse_series);
    results["final_active_count"] = active_parameter_count(trace.final_state);
  }

  manifest["outputs"] = outputs;
  manifest["results"] = std::move(results);
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, RunMode mode) {
  std::vector<RunResult> results;
  const std::string mode_tag = (mode == RunMode::DirectFit) ? "fit" : "select";

  for (std::uint64_t seed : cfg.seeds) {
    RunResult rr;
    rr.seed = seed;
    rr.dir = fs::path(cfg.out_dir) /
             (std::string(to_string(cfg.scenario)) + "_" + mode_tag + "_seed" + std::to_string(seed));
    fs::create_directories(rr.dir);

    json manifest;
    manifest["code_version"] = std::string(kCodeVersion);
    manifest["mode"] = std::string(to_string(mode));
    manifest["scenario"] = std::string(to_string(cfg.scenario));
    manifest["seed"] = seed;
    manifest["config_hash"] = config_hash(cfg);
    manifest["config"] = config_to_json(cfg);

    try {
      run_one(cfg, mode, seed, rr.dir, manifest);
      manifest["status"] = "ok";
      rr.ok = true;
    } catch (const std::exception& e) {
      manifest["status"] = std::string("failed: ") + e.what();
      rr.error = e.what();
    }
    write_text_file(rr.dir / "manifest.json", manifest.dump(2) + "\n");
    results.push_back(std::move(rr));
  }
  return results;
}

namespace {

std::optional<double> first_finite_mse(const json& series) {
  if (series.empty()) return std::nullopt;
  const auto& e = series.front();
  if (e.at("mse").is_null()) return std::numeric_limits<double>::infinity();
  return e.at("mse").get<double>();
}

std::optional<double> last_finite_mse(const json& series) {
  if (series.empty()) return std::nullopt;
  const auto& e = series.back();
  if (e.at("mse").is_null()) return std::numeric_limits<double>::infinity();
  return e.at("mse").get<double>();
}

}  // namespace

ReportSummary emit_report(const fs::path& root, std::ostream& text_out) {
  std::vector<fs::path> manifests;
  if (fs::exists(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
        manifests.push_back(entry.path() / "manifest.json");
      }
    }
  }
  std::sort(manifests.begin(), manifests.end());

  ReportSummary summary;
  // (scenario, seed) -> final mse, for select runs
  std::map<std::pair<std::string, std::uint64_t>, double> select_final;

  for (const fs::path& mpath : manifests) {
    std::ifstream in(mpath);
    json m;
    try {
      m = json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
    if (m.value("status", "") != "ok") continue;

    ReportRow row;
    row.mode = m.value("mode", "?");
    row.scenario = m.value("scenario", "?");
    row.seed = m.value("seed", 0ull);

    if (row.mode == "select") {
      const json& series = m.at("results").at("mse_series");
      row.first_mse = first_finite_mse(series);
      row.final_mse = last_finite_mse(series);
      if (row.first_mse && row.final_mse) {
        row.decreased = *row.final_mse < *row.first_mse;
        ClaimTally& tally =
            (row.scenario == "late") ? summary.late_mse_decreasing : summary.full_mse_decreasing;
        if (row.scenario == "late" || row.scenario == "full") {
          ++tally.total;
          if (*row.decreased) ++tally.satisfied;
        }
        select_final[{row.scenario, row.seed}] = *row.final_mse;
      }
    } else if (m.at("results").contains("trajectory_mse") &&
               !m.at("results").at("trajectory_mse").is_null()) {
      row.final_mse = m.at("results").at("trajectory_mse").get<double>();
    }
    summary.rows.push_back(std::move(row));
  }

  for (const auto& [key, full_final] : select_final) {
    if (key.first != "full") continue;
    const auto it = select_final.find({"late", key.second});
    if (it == select_final.end()) continue;
    ++summary.full_final_below_late_final.total;
    if (full_final < it->second) ++summary.full_final_below_late_final.satisfied;
  }

  // report.csv
  std::string csv = "mode,scenario,seed,first_mse,final_mse,decreased\n";
  for (const ReportRow& r : summary.rows) {
    csv += r.mode + "," + r.scenario + "," + std::to_string(r.seed) + ",";
    csv += (r.first_mse ? fmt6(*r.first_mse) : "") + std::string(",");
    csv += (r.final_mse ? fmt6(*r.final_mse) : "") + std::string(",");
    csv += r.decreased ? (*r.decreased ? "1" : "0") : "";
    csv += "\n";
  }
  write_text_file(root / "report.csv", csv);

  auto claim_json = [](const ClaimTally& t) {
    json c;
    c["available"] = t.available();
    c["satisfied"] = t.satisfied;
    c["total"] = t.total;
    c["majority"] = t.available() ? json(t.majority()) : json(nullptr);
    return c;
  };
  json report;
  report["code_version"] = std::string(kCodeVersion);
  report["runs"] = summary.rows.size();
  report["claims"] = {{"full_mse_decreasing", claim_json(summary.full_mse_decreasing)},
                      {"late_mse_decreasing", claim_json(summary.late_mse_decreasing)},
                      {"full_final_below_late_final", claim_json(summary.full_final_below_late_final)}};
  write_text_file(root / "report.json", report.dump(2) + "\n");

  // readable summary
  text_out << "runs: " << summary.rows.size() << "\n";
  for (const ReportRow& r : summary.rows) {
    text_out << "  " << r.mode << " " << r.scenario << " seed " << r.seed;
    if (r.first_mse) text_out << "  first " << fmt6(*r.first_mse);
    if (r.final_mse) text_out << "  final " << fmt6(*r.final_mse);
    if (r.decreased) text_out << "  " << (*r.decreased ? "decreased" : "not decreased");
    text_out << "\n";
  }
  auto print_claim = [&](const char* name, const ClaimTally& t) {
    text_out << name << ": ";
    if (!t.available()) {
      text_out << "unavailable\n";
    } else {
      text_out << t.satisfied << "/" << t.total << (t.majority() ? " (majority: satisfied)" : " (majority: not satisfied)")
               << "\n";
    }
  };
  print_claim("MSE decreasing over selection steps (full window)", summary.full_mse_decreasing);
  print_claim("MSE decreasing over selection steps (late window)", summary.late_mse_decreasing);
  print_claim("full-window final MSE below late-window final MSE", summary.full_final_below_late_final);
  return summary;
}

}  // namespace mechsel
