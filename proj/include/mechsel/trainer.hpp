#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mechsel/model.hpp"
#include "mechsel/ode.hpp"
#include "mechsel/surrogate.hpp"

namespace mechsel {

/// Training configuration. The defaults mirror the reference setup: 5000
/// epochs, batch size 100, Adam with its customary moments, equal loss
/// weights, unconstrained parameter signs.
struct HyperParams {
  int epochs = 5000;
  int batch_size = 100;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double data_weight = 1.0;
  double residual_weight = 1.0;
  bool nonnegativity = false;
  std::uint64_t seed = 1;
};

struct FitResult {
  ParameterState fitted;
  SurrogateWeights weights;
  std::vector<LossBreakdown> loss_history;  // one entry per completed epoch
  bool failed = false;
  std::string failure;
};

/// Data MSE over the batch plus ODE-residual MSE over the collocation
/// points, both averaged over points and components. Plain evaluation; the
/// training path computes the same quantities on the tape.
LossBreakdown pinn_loss(const SurrogateWeights& w, const ParameterState& state,
                        std::span<const DataPoint> batch, std::span<const double> collocation,
                        const LossSpec& spec);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Standard Adam update with bias-corrected moments, in place. Trainables
/// from `mech_begin` on are mechanism parameters; when hyper.nonnegativity is
/// set they are clamped to max(value, 0) after the update.
void adam_step(AdamState& opt, std::span<const double> grads, std::span<double> trainables,
               const HyperParams& hyper, std::size_t mech_begin = 0);

/// Joint surrogate/parameter optimization of the active parameters in
/// `family` against `data`. Fresh Glorot surrogate and fresh parameter draws
/// per call, all derived from hyper.seed; collocation points are the
/// dataset's time points. Deterministic given identical inputs. A
/// non-finite loss aborts the run and returns the partial history with the
/// failed flag set.
FitResult fit(const ParameterState& family, const Dataset& data, const HyperParams& hyper);

/// Independent recoverability oracle: linear least squares on the exact
/// derivatives stored in a dense noiseless trajectory. Equation one is
/// regressed on {u^2, uv} after moving the fixed u term left; equation two
/// on {v, uv, v^2}. Throws DegenerateRecoveryError when the leading
/// coefficient vanishes.
BaseParams oracle_derivative_fit(const Trajectory& dense);

}  // namespace mechsel
