#include "mechsel/ode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace mechsel {

namespace {

bool inside_box(const State& s) {
  return std::fabs(s.u) <= kBlowUpBound && std::fabs(s.v) <= kBlowUpBound;
}

[[noreturn]] void throw_blow_up(double t) {
  throw BlowUpError("solution left [-1e6, 1e6] near t = " + std::to_string(t));
}

// Cubic Hermite on [t0, t1] with endpoint values y and slopes m.
double hermite(double t0, double t1, double y0, double y1, double m0, double m1, double t) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
}

}  // namespace

std::vector<double> Dataset::times() const {
  std::vector<double> ts;
  ts.reserve(points.size());
  for (const DataPoint& p : points) ts.push_back(p.t);
  return ts;
}

Trajectory integrate_rhs(const RhsFn& rhs, State initial, double t0, double t1, double step) {
  if (!(t1 > t0) || !(step > 0.0) || !std::isfinite(initial.u) || !std::isfinite(initial.v)) {
    throw InvalidInputError("integrate: need t1 > t0, step > 0 and a finite initial state");
  }
  if (!inside_box(initial)) throw_blow_up(t0);

  const int n_steps = static_cast<int>(std::ceil((t1 - t0) / step - 1e-12));

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.derivs.reserve(static_cast<std::size_t>(n_steps) + 1);

  State y = initial;
  double t = t0;
  for (int k = 0; k < n_steps; ++k) {
    const double t_next = (k + 1 == n_steps) ? t1 : t0 + (k + 1) * step;
    const double h = t_next - t;

    const Deriv k1 = rhs(t, y);
    traj.times.push_back(t);
    traj.states.push_back(y);
    traj.derivs.push_back(k1);

    const State s2{y.u + 0.5 * h * k1.du, y.v + 0.5 * h * k1.dv};
    const Deriv k2 = rhs(t + 0.5 * h, s2);
    const State s3{y.u + 0.5 * h * k2.du, y.v + 0.5 * h * k2.dv};
    const Deriv k3 = rhs(t + 0.5 * h, s3);
    const State s4{y.u + h * k3.du, y.v + h * k3.dv};
    const Deriv k4 = rhs(t_next, s4);

    y.u += h / 6.0 * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du);
    y.v += h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    t = t_next;
    if (!inside_box(y)) throw_blow_up(t);
  }

  traj.times.push_back(t1);
  traj.states.push_back(y);
  traj.derivs.push_back(rhs(t1, y));
  return traj;
}

Trajectory integrate(const ParameterState& state, State initial, double t0, double t1, double step) {
  const std::array<double, kNumParams> p = state.effective_values();
  auto rhs = [&p](double, const State& s) {
    Deriv d;
    rhs_terms(p, s.u, s.v, d.du, d.dv);
    return d;
  };
  return integrate_rhs(rhs, initial, t0, t1, step);
}

std::vector<State> sample(const Trajectory& traj, std::span<const double> query_times) {
  if (traj.size() < 2) throw InvalidInputError("sample: trajectory needs at least two nodes");
  const double lo = traj.times.front();
  const double hi = traj.times.back();

  std::vector<State> out;
  out.reserve(query_times.size());
  for (double t : query_times) {
    if (!(t >= lo) || !(t <= hi)) {
      throw OutOfRangeError("sample: query t = " + std::to_string(t) + " outside trajectory span");
    }
    if (t == hi) {
      out.push_back(traj.states.back());
      continue;
    }
    const auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
    const std::size_t seg = static_cast<std::size_t>(it - traj.times.begin()) - 1;
    if (t == traj.times[seg]) {
      out.push_back(traj.states[seg]);
      continue;
    }
    const double t0 = traj.times[seg];
    const double t1 = traj.times[seg + 1];
    out.push_back(State{
        hermite(t0, t1, traj.states[seg].u, traj.states[seg + 1].u, traj.derivs[seg].du,
                traj.derivs[seg + 1].du, t),
        hermite(t0, t1, traj.states[seg].v, traj.states[seg + 1].v, traj.derivs[seg].dv,
                traj.derivs[seg + 1].dv, t),
    });
  }
  return out;
}

Dataset generate_dataset(const ParameterState& truth, State initial, double lo, double hi,
                         int n_points) {
  if (!(lo >= kTimeLo) || !(hi <= kTimeHi) || !(lo < hi)) {
    throw InvalidWindowError("generate_dataset: window must satisfy 0 <= lo < hi <= 20");
  }
  if (n_points < 0) throw InvalidInputError("generate_dataset: n_points must be >= 0");

  Dataset ds;
  ds.window_lo = lo;
  ds.window_hi = hi;
  ds.includes_initial = true;
  ds.points.push_back(DataPoint{0.0, initial.u, initial.v});
  if (n_points > 0) {
    const Trajectory traj = integrate(truth, initial, kTimeLo, kTimeHi, kDefaultStep);
    const std::vector<double> ts = linspace(lo, hi, n_points);
    const std::vector<State> ys = sample(traj, ts);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      ds.points.push_back(DataPoint{ts[i], ys[i].u, ys[i].v});
    }
  }
  return ds;
}

double trajectory_mse(const Trajectory& a, const Trajectory& b, std::span<const double> grid) {
  if (grid.empty()) throw InvalidInputError("trajectory_mse: empty grid");
  const std::vector<State> ya = sample(a, grid);
  const std::vector<State> yb = sample(b, grid);
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double du = ya[i].u - yb[i].u;
    const double dv = ya[i].v - yb[i].v;
    acc += du * du + dv * dv;
  }
  return acc / (2.0 * static_cast<double>(grid.size()));
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> ts;
  if (n <= 0) return ts;
  ts.reserve(static_cast<std::size_t>(n));
  if (n == 1) {
    ts.push_back(lo);
    return ts;
  }
  for (int i = 0; i < n; ++i) {
    ts.push_back(i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return ts;
}

std::vector<double> standard_mse_grid() { return linspace(kTimeLo, kTimeHi, 401); }

void write_trajectory_tsv(std::ostream& out, const Trajectory& traj) {
  char line[128];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.6g\t%.6g\t%.6g\n", traj.times[i], traj.states[i].u,
                  traj.states[i].v);
    out << line;
  }
}

}  // namespace mechsel
