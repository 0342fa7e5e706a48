#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mechsel/trainer.hpp"

namespace mechsel {

using ParamMask = std::array<bool, kNumParams>;

inline ParamMask no_protection() { return ParamMask{}; }
ParamMask structural_protection();

/// Values at or below this magnitude count as zeros and are all eliminated
/// in one step.
inline constexpr double kZeroTol = 1e-6;

/// One fit/eliminate round. `eliminated` is empty only on the final step of
/// a trace; `fitted.mask` is the active set that was fitted this step.
struct SelectionStepRecord {
  int step = 0;  // 1-based
  ParameterState fitted;
  std::vector<int> eliminated;
  double trajectory_mse = 0.0;
  bool mse_blow_up = false;
  bool fit_failed = false;
};

struct SelectionTrace {
  std::vector<SelectionStepRecord> steps;
  ParameterState final_state;
  std::string scenario;
  std::uint64_t seed = 0;
};

/// Elimination rule: if any active unprotected |value| < zero_tol, all such
/// parameters go together; otherwise exactly the single active unprotected
/// parameter of smallest |value| goes, ties broken by canonical order.
/// Returns the reduced mask and the removed indices. Throws
/// NothingToEliminateError when no parameter is eligible.
std::pair<ParamMask, std::vector<int>> eliminate_smallest(const ParameterState& fitted,
                                                          const ParamMask& protected_mask,
                                                          double zero_tol = kZeroTol);

/// Fit / eliminate / redefine until at most `epsilon` parameters stay
/// active. Every step refits from a fresh initialization whose seed derives
/// from (hyper.seed, step). Each record carries the trajectory MSE of the
/// learned model (integrated from the data's initial condition) against
/// `truth` on the standard grid. A failed fit ends the trace with the
/// failure marker set on its step.
SelectionTrace run_selection(const ParameterState& family, const Dataset& data, int epsilon,
                             const HyperParams& hyper, const ParamMask& protected_mask,
                             const Trajectory& truth, std::string scenario_label = {},
                             double zero_tol = kZeroTol);

struct StepMse {
  int step = 0;
  double mse = 0.0;
  bool blow_up = false;
};

/// Per-step trajectory MSE of each recorded model against the truth
/// parameters, integrated from `initial` over the grid span. A blow-up is
/// recorded as infinity with the flag set.
std::vector<StepMse> step_mse_series(const SelectionTrace& trace, const ParameterState& truth,
                                     State initial, std::span<const double> grid);

/// CSV layout: step,name,value,active,eliminated_this_step with one row per
/// (step, parameter); values are blank for parameters already removed.
void write_trace_csv(std::ostream& out, const SelectionTrace& trace);

/// Lossless JSON serialization (full-precision values).
nlohmann::ordered_json trace_to_json(const SelectionTrace& trace);
SelectionTrace trace_from_json(const nlohmann::ordered_json& j);

}  // namespace mechsel
