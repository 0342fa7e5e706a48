#include "mechsel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mechsel/rng.hpp"

namespace mechsel {

namespace {

void validate_hyper(const HyperParams& h) {
  if (h.epochs < 1 || h.batch_size < 1 || !(h.learning_rate > 0.0)) {
    throw InvalidInputError("hyper: epochs >= 1, batch_size >= 1, learning_rate > 0 required");
  }
}

// Gaussian elimination with partial pivoting on an n x n system, n <= 3.
void solve_small(double a[3][3], double b[3], int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    if (std::fabs(a[piv][col]) < 1e-300) {
      throw DegenerateRecoveryError("oracle_derivative_fit: singular regression system");
    }
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a[piv][c], a[col][c]);
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a[r][c] * b[c];
    b[r] = acc / a[r][r];
  }
}

}  // namespace

LossBreakdown pinn_loss(const SurrogateWeights& w, const ParameterState& state,
                        std::span<const DataPoint> batch, std::span<const double> collocation,
                        const LossSpec& spec) {
  if (batch.empty() || collocation.empty()) {
    throw InvalidInputError("pinn_loss: batch and collocation must be nonempty");
  }

  double data_sum = 0.0;
  for (const DataPoint& p : batch) {
    const std::array<double, 2> y = mlp_forward(w, normalize_time(p.t));
    const double eu = y[0] - p.u;
    const double ev = y[1] - p.v;
    data_sum += eu * eu + ev * ev;
  }

  const std::array<double, kNumParams> pv = state.effective_values();
  double res_sum = 0.0;
  for (double t : collocation) {
    std::array<double, 2> y{}, yd{};
    mlp_eval_with_time_derivative(w, normalize_time(t), y, yd);
    double fu = 0.0, fv = 0.0;
    rhs_terms(pv, y[0], y[1], fu, fv);
    const double ru = yd[0] - fu;
    const double rv = yd[1] - fv;
    res_sum += ru * ru + rv * rv;
  }

  LossBreakdown loss;
  loss.data_mse = data_sum / (2.0 * static_cast<double>(batch.size()));
  loss.residual_mse = res_sum / (2.0 * static_cast<double>(collocation.size()));
  loss.total = spec.data_weight * loss.data_mse + spec.residual_weight * loss.residual_mse;
  if (!std::isfinite(loss.data_mse)) throw NumericalOverflowError("pinn_loss: data term is non-finite");
  if (!std::isfinite(loss.residual_mse)) {
    throw NumericalOverflowError("pinn_loss: residual term is non-finite");
  }
  return loss;
}

void adam_step(AdamState& opt, std::span<const double> grads, std::span<double> trainables,
               const HyperParams& hyper, std::size_t mech_begin) {
  if (grads.size() != trainables.size() || opt.m.size() != trainables.size()) {
    throw InvalidInputError("adam_step: gradient/moment shapes do not match trainables");
  }
  ++opt.step;
  const double c1 = 1.0 - std::pow(hyper.adam_beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(hyper.adam_beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < trainables.size(); ++i) {
    const double g = grads[i];
    opt.m[i] = hyper.adam_beta1 * opt.m[i] + (1.0 - hyper.adam_beta1) * g;
    opt.v[i] = hyper.adam_beta2 * opt.v[i] + (1.0 - hyper.adam_beta2) * g * g;
    const double m_hat = opt.m[i] / c1;
    const double v_hat = opt.v[i] / c2;
    trainables[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.adam_eps);
  }
  if (hyper.nonnegativity) {
    for (std::size_t i = mech_begin; i < trainables.size(); ++i) {
      trainables[i] = std::max(trainables[i], 0.0);
    }
  }
}

FitResult fit(const ParameterState& family, const Dataset& data, const HyperParams& hyper) {
  validate_hyper(hyper);
  if (data.points.empty()) throw InvalidInputError("fit: empty dataset");
  if (active_parameter_count(family) < 1) {
    throw InvalidInputError("fit: at least one active parameter required");
  }

  // Fresh initialization, all streams derived from the run seed.
  SurrogateWeights w = SurrogateWeights::glorot(SurrogateConfig{}, derive_seed(hyper.seed, 1));
  SplitMix64 param_rng(derive_seed(hyper.seed, 2));
  ParameterState state = family;
  std::vector<int> active;
  for (int i = 0; i < kNumParams; ++i) {
    if (!family.mask[static_cast<std::size_t>(i)]) {
      state.set_value(i, 0.0);
      continue;
    }
    active.push_back(i);
    state.set_value(i, i >= kGrowthR ? param_rng.uniform(0.3, 1.0) : 0.0);
  }

  const std::vector<double> collocation = data.times();
  const LossSpec spec{hyper.data_weight, hyper.residual_weight};
  const std::size_t nw = w.size();

  std::vector<double> theta(nw + active.size());
  std::copy(w.flat().begin(), w.flat().end(), theta.begin());
  for (std::size_t k = 0; k < active.size(); ++k) theta[nw + k] = state.value(active[k]);

  AdamState opt(theta.size());
  std::vector<double> grad(theta.size());
  SplitMix64 shuffle_rng(derive_seed(hyper.seed, 3));
  std::vector<std::size_t> order(data.points.size());

  FitResult result;
  result.loss_history.reserve(static_cast<std::size_t>(hyper.epochs));

  const std::size_t n = data.points.size();
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(hyper.batch_size), n);
  std::vector<DataPoint> batch;
  batch.reserve(bs);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), shuffle_rng);

    double data_acc = 0.0;
    double res_acc = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(start + bs, n);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(data.points[order[k]]);

      Gradients g;
      try {
        g = grad_all(w, state, batch, collocation, spec);
      } catch (const NumericalOverflowError& e) {
        result.failed = true;
        result.failure = e.what();
        result.fitted = state;
        result.weights = w;
        return result;
      }

      std::copy(g.weight_grad.begin(), g.weight_grad.end(), grad.begin());
      for (std::size_t k = 0; k < g.mechanism_grad.size(); ++k) {
        grad[nw + k] = g.mechanism_grad[k].grad;
      }
      adam_step(opt, grad, theta, hyper, nw);

      std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(nw), w.flat().begin());
      for (std::size_t k = 0; k < active.size(); ++k) state.set_value(active[k], theta[nw + k]);

      data_acc += g.loss.data_mse * static_cast<double>(batch.size());
      res_acc += g.loss.residual_mse;
      ++n_batches;
    }

    LossBreakdown epoch_loss;
    epoch_loss.data_mse = data_acc / static_cast<double>(n);
    epoch_loss.residual_mse = res_acc / static_cast<double>(n_batches);
    epoch_loss.total = hyper.data_weight * epoch_loss.data_mse + hyper.residual_weight * epoch_loss.residual_mse;
    result.loss_history.push_back(epoch_loss);
  }

  result.fitted = state;
  result.weights = w;
  return result;
}

BaseParams oracle_derivative_fit(const Trajectory& dense) {
  if (dense.size() < 4) throw InvalidInputError("oracle_derivative_fit: trajectory too short");

  // Equation one: du - u = -a1 u^2 - a2 uv.
  double a2x2[3][3] = {};
  double b2[3] = {};
  // Equation two: dv = c1 v + c2 uv + c3 v^2.
  double a3x3[3][3] = {};
  double b3[3] = {};

  for (std::size_t k = 0; k < dense.size(); ++k) {
    const double u = dense.states[k].u;
    const double v = dense.states[k].v;
    const double x1 = u * u;
    const double x2 = u * v;
    const double y1 = dense.derivs[k].du - u;
    a2x2[0][0] += x1 * x1;
    a2x2[0][1] += x1 * x2;
    a2x2[1][1] += x2 * x2;
    b2[0] += x1 * y1;
    b2[1] += x2 * y1;

    const double z1 = v;
    const double z2 = u * v;
    const double z3 = v * v;
    const double y2 = dense.derivs[k].dv;
    a3x3[0][0] += z1 * z1;
    a3x3[0][1] += z1 * z2;
    a3x3[0][2] += z1 * z3;
    a3x3[1][1] += z2 * z2;
    a3x3[1][2] += z2 * z3;
    a3x3[2][2] += z3 * z3;
    b3[0] += z1 * y2;
    b3[1] += z2 * y2;
    b3[2] += z3 * y2;
  }
  a2x2[1][0] = a2x2[0][1];
  a3x3[1][0] = a3x3[0][1];
  a3x3[2][0] = a3x3[0][2];
  a3x3[2][1] = a3x3[1][2];

  solve_small(a2x2, b2, 2);
  solve_small(a3x3, b3, 3);

  const double c1 = b3[0];
  if (std::fabs(c1) < 1e-10) {
    throw DegenerateRecoveryError("oracle_derivative_fit: growth-rate coefficient is zero");
  }

  BaseParams out;
  out.a1 = -b2[0];
  out.a2 = -b2[1];
  out.r = c1;
  out.b1 = -b3[1] / c1;
  out.b2 = -b3[2] / c1;
  return out;
}

}  // namespace mechsel
