#include "mechsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "mechsel/rng.hpp"

namespace mechsel {

namespace {

// External row order used by CSV outputs: structural block first.
constexpr int kCsvOrder[kNumParams] = {kGrowthR, kA1,    kA2,    kB1,    kB2,
                                       kAlpha0,  kAlpha1, kAlpha2, kAlpha3, kAlpha4,
                                       kBeta0,   kBeta1,  kBeta2,  kBeta3,  kBeta4};

std::string fmt6(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace

ParamMask structural_protection() {
  ParamMask m{};
  for (int i = kGrowthR; i <= kB2; ++i) m[static_cast<std::size_t>(i)] = true;
  return m;
}

std::pair<ParamMask, std::vector<int>> eliminate_smallest(const ParameterState& fitted,
                                                          const ParamMask& protected_mask,
                                                          double zero_tol) {
  std::vector<int> zeros;
  int smallest = -1;
  double smallest_mag = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumParams; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!fitted.mask[k] || protected_mask[k]) continue;
    const double mag = std::fabs(fitted.value(i));
    if (mag < zero_tol) zeros.push_back(i);
    if (mag < smallest_mag) {  // strict: ties keep the earliest canonical index
      smallest_mag = mag;
      smallest = i;
    }
  }
  if (smallest < 0) {
    throw NothingToEliminateError("eliminate_smallest: no active unprotected parameter");
  }

  std::vector<int> eliminated = zeros.empty() ? std::vector<int>{smallest} : zeros;
  ParamMask mask = fitted.mask;
  for (int i : eliminated) mask[static_cast<std::size_t>(i)] = false;
  return {mask, eliminated};
}

SelectionTrace run_selection(const ParameterState& family, const Dataset& data, int epsilon,
                             const HyperParams& hyper, const ParamMask& protected_mask,
                             const Trajectory& truth, std::string scenario_label, double zero_tol) {
  if (epsilon < 0) throw InvalidInputError("run_selection: epsilon must be >= 0");
  if (!data.includes_initial || data.points.empty()) {
    throw InvalidInputError("run_selection: dataset must carry the initial condition");
  }
  const State initial{data.points.front().u, data.points.front().v};
  const std::vector<double> grid = standard_mse_grid();

  SelectionTrace trace;
  trace.scenario = std::move(scenario_label);
  trace.seed = hyper.seed;

  ParameterState current = family;
  for (int step = 1;; ++step) {
    HyperParams h = hyper;
    h.seed = derive_seed(hyper.seed, static_cast<std::uint64_t>(step));
    const FitResult fitted = fit(current, data, h);

    SelectionStepRecord rec;
    rec.step = step;
    rec.fitted = fitted.fitted;
    if (fitted.failed) {
      rec.fit_failed = true;
      trace.steps.push_back(std::move(rec));
      trace.final_state = current;
      return trace;
    }

    try {
      const Trajectory learned = integrate(fitted.fitted, initial, kTimeLo, kTimeHi, kDefaultStep);
      rec.trajectory_mse = trajectory_mse(learned, truth, grid);
    } catch (const BlowUpError&) {
      rec.trajectory_mse = std::numeric_limits<double>::infinity();
      rec.mse_blow_up = true;
    }

    if (active_parameter_count(fitted.fitted) <= epsilon) {
      trace.steps.push_back(std::move(rec));
      trace.final_state = fitted.fitted;
      return trace;
    }

    auto [mask, eliminated] = eliminate_smallest(fitted.fitted, protected_mask, zero_tol);
    rec.eliminated = eliminated;
    trace.steps.push_back(std::move(rec));

    current = fitted.fitted;
    current.mask = mask;
    for (int i : eliminated) current.set_value(i, 0.0);
    if (active_parameter_count(current) == 0) {
      trace.final_state = current;
      return trace;
    }
  }
}

std::vector<StepMse> step_mse_series(const SelectionTrace& trace, const ParameterState& truth,
                                     State initial, std::span<const double> grid) {
  if (grid.empty()) throw InvalidInputError("step_mse_series: empty grid");
  const double t_end = grid.back();
  const Trajectory truth_traj = integrate(truth, initial, kTimeLo, t_end, kDefaultStep);

  std::vector<StepMse> series;
  series.reserve(trace.steps.size());
  for (const SelectionStepRecord& rec : trace.steps) {
    if (rec.fit_failed) throw InvalidInputError("step_mse_series: trace contains a failed step");
    StepMse entry;
    entry.step = rec.step;
    try {
      const Trajectory learned = integrate(rec.fitted, initial, kTimeLo, t_end, kDefaultStep);
      entry.mse = trajectory_mse(learned, truth_traj, grid);
    } catch (const BlowUpError&) {
      entry.mse = std::numeric_limits<double>::infinity();
      entry.blow_up = true;
    }
    series.push_back(entry);
  }
  return series;
}

void write_trace_csv(std::ostream& out, const SelectionTrace& trace) {
  out << "step,name,value,active,eliminated_this_step\n";
  for (const SelectionStepRecord& rec : trace.steps) {
    for (int i : kCsvOrder) {
      const bool active = rec.fitted.mask[static_cast<std::size_t>(i)];
      const bool gone = !rec.eliminated.empty() &&
                        std::find(rec.eliminated.begin(), rec.eliminated.end(), i) != rec.eliminated.end();
      out << rec.step << ',' << param_name(i) << ',' << (active ? fmt6(rec.fitted.value(i)) : "")
          << ',' << (active ? 1 : 0) << ',' << (gone ? 1 : 0) << '\n';
    }
  }
}

nlohmann::ordered_json trace_to_json(const SelectionTrace& trace) {
  nlohmann::ordered_json j;
  j["scenario"] = trace.scenario;
  j["seed"] = trace.seed;
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const SelectionStepRecord& rec : trace.steps) {
    nlohmann::ordered_json s;
    s["step"] = rec.step;
    nlohmann::ordered_json values;
    for (int i : kCsvOrder) {
      if (rec.fitted.mask[static_cast<std::size_t>(i)]) {
        values[std::string(param_name(i))] = rec.fitted.value(i);
      }
    }
    s["values"] = std::move(values);
    nlohmann::ordered_json elim = nlohmann::ordered_json::array();
    for (int i : rec.eliminated) elim.push_back(std::string(param_name(i)));
    s["eliminated"] = std::move(elim);
    // JSON has no infinity; a blown-up MSE round-trips as null.
    if (std::isfinite(rec.trajectory_mse)) {
      s["trajectory_mse"] = rec.trajectory_mse;
    } else {
      s["trajectory_mse"] = nullptr;
    }
    s["mse_blow_up"] = rec.mse_blow_up;
    s["fit_failed"] = rec.fit_failed;
    steps.push_back(std::move(s));
  }
  j["steps"] = std::move(steps);
  nlohmann::ordered_json fin;
  for (int i : kCsvOrder) {
    if (trace.final_state.mask[static_cast<std::size_t>(i)]) {
      fin[std::string(param_name(i))] = trace.final_state.value(i);
    }
  }
  j["final"] = std::move(fin);
  return j;
}

namespace {

ParameterState state_from_values(const nlohmann::ordered_json& values) {
  ParameterState st;
  for (const auto& [key, val] : values.items()) {
    const int i = param_index(key);
    st.mask[static_cast<std::size_t>(i)] = true;
    st.set_value(i, val.get<double>());
  }
  return st;
}

}  // namespace

SelectionTrace trace_from_json(const nlohmann::ordered_json& j) {
  SelectionTrace trace;
  trace.scenario = j.at("scenario").get<std::string>();
  trace.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("steps")) {
    SelectionStepRecord rec;
    rec.step = s.at("step").get<int>();
    rec.fitted = state_from_values(s.at("values"));
    for (const auto& name : s.at("eliminated")) {
      rec.eliminated.push_back(param_index(name.get<std::string>()));
    }
    rec.trajectory_mse = s.at("trajectory_mse").is_null() ? std::numeric_limits<double>::infinity()
                                                          : s.at("trajectory_mse").get<double>();
    rec.mse_blow_up = s.at("mse_blow_up").get<bool>();
    rec.fit_failed = s.at("fit_failed").get<bool>();
    trace.steps.push_back(std::move(rec));
  }
  trace.final_state = state_from_values(j.at("final"));
  return trace;
}

}  // namespace mechsel
