#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mechsel/model.hpp"

namespace mechsel {

struct State {
  double u = 0.0;
  double v = 0.0;
};

struct Deriv {
  double du = 0.0;
  double dv = 0.0;
};

/// Fixed integration step used for truth generation and model evaluation.
inline constexpr double kDefaultStep = 1e-2;

/// Integration aborts once the solution leaves [-kBlowUpBound, kBlowUpBound].
inline constexpr double kBlowUpBound = 1e6;

/// Supported data span; datasets and time normalization live on [0, 20].
inline constexpr double kTimeLo = 0.0;
inline constexpr double kTimeHi = 20.0;

/// Dense numerical solution. `derivs` holds the right-hand side evaluated at
/// every node, which makes cubic Hermite sampling self-contained.
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<Deriv> derivs;

  std::size_t size() const { return times.size(); }
};

struct DataPoint {
  double t = 0.0;
  double u = 0.0;
  double v = 0.0;
};

/// Sampled data points. When `includes_initial` is set, points.front() is the
/// prepended initial condition at t = 0 and the remaining entries lie inside
/// the window.
struct Dataset {
  std::vector<DataPoint> points;
  double window_lo = 0.0;
  double window_hi = 0.0;
  bool includes_initial = false;

  std::vector<double> times() const;
};

using RhsFn = std::function<Deriv(double t, const State&)>;

/// Classical fixed-step RK4. Samples at every step; the final step is
/// shortened so the last node lands exactly on t1. Throws BlowUpError when
/// the solution leaves the admissible box (non-finite states included).
Trajectory integrate_rhs(const RhsFn& rhs, State initial, double t0, double t1, double step);

/// integrate_rhs applied to the augmented competition model.
Trajectory integrate(const ParameterState& state, State initial, double t0, double t1,
                     double step = kDefaultStep);

/// Piecewise-cubic Hermite interpolation through the stored nodes, exact at
/// the nodes. Queries outside the trajectory span throw OutOfRangeError.
std::vector<State> sample(const Trajectory& traj, std::span<const double> query_times);

/// n_points uniformly spaced samples spanning [lo, hi] inclusive, prepended
/// with the initial condition at t = 0. The window must lie within [0, 20].
Dataset generate_dataset(const ParameterState& truth, State initial, double lo, double hi,
                         int n_points);

/// Mean over grid points and both components of squared differences.
double trajectory_mse(const Trajectory& a, const Trajectory& b, std::span<const double> grid);

/// n uniformly spaced values spanning [lo, hi] inclusive (n >= 2); {lo} for n == 1.
std::vector<double> linspace(double lo, double hi, int n);

/// Fixed evaluation grid for trajectory MSE series: 401 points on [0, 20].
std::vector<double> standard_mse_grid();

/// Tab-separated rows (t, u, v), one per stored node.
void write_trajectory_tsv(std::ostream& out, const Trajectory& traj);

}  // namespace mechsel
