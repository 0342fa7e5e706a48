#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mechsel/selection.hpp"

namespace mechsel {

inline constexpr std::string_view kCodeVersion = "mechsel 0.1.0";

enum class Scenario { Full, Late, Custom };
enum class RunMode { DirectFit, Selection };

std::string_view to_string(Scenario s);
std::string_view to_string(RunMode m);

/// Fully resolved experiment description. Defaults reproduce the reference
/// setup: coexistence truth (r=0.5, a1=0.7, a2=0.3, b1=0.3, b2=0.6), initial
/// condition (2, 1), 100 data points, epsilon = 6.
struct ExperimentConfig {
  BaseParams truth{0.5, 0.7, 0.3, 0.3, 0.6};
  State initial{2.0, 1.0};
  Scenario scenario = Scenario::Full;
  double window_lo = 0.0;
  double window_hi = 20.0;
  int n_points = 100;
  int epsilon = 6;
  HyperParams hyper;  // per-run seed comes from `seeds`
  bool protect_structural = false;
  double zero_tol = kZeroTol;
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds{1};
};

/// Parses a flat JSON key-value document, applies defaults, validates every
/// key and rejects unknown ones. Errors name the offending key.
ExperimentConfig parse_config(const std::string& text);

/// Resolved config as the same flat document parse_config accepts.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

/// FNV-1a 64 hash (hex) of the canonical config serialization.
std::string config_hash(const ExperimentConfig& cfg);

struct RunResult {
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
};

/// Executes one run per seed, writing artifacts into per-run subdirectories
/// of cfg.out_dir. Direct-fit runs produce fit_params.csv and
/// loss_history.csv; selection runs produce trace.csv, mse_series.csv and
/// truth/learned trajectory TSVs. Every run writes manifest.json with the
/// resolved config, a config hash and full-precision results.
std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, RunMode mode);

struct ReportRow {
  std::string mode;
  std::string scenario;
  std::uint64_t seed = 0;
  std::optional<double> first_mse;
  std::optional<double> final_mse;
  std::optional<bool> decreased;
};

struct ClaimTally {
  int satisfied = 0;
  int total = 0;
  bool available() const { return total > 0; }
  bool majority() const { return 2 * satisfied > total; }
};

struct ReportSummary {
  std::vector<ReportRow> rows;
  ClaimTally full_mse_decreasing;
  ClaimTally late_mse_decreasing;
  ClaimTally full_final_below_late_final;
};

/// Scans `root` for run manifests, writes report.csv / report.json there and
/// prints a readable summary. Majority rule: a claim holds when satisfied in
/// more than half of the contributing seed runs.
ReportSummary emit_report(const std::filesystem::path& root, std::ostream& text_out);

}  // namespace mechsel
