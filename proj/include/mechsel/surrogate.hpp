#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mechsel/model.hpp"
#include "mechsel/ode.hpp"

namespace mechsel {

/// Fixed fully connected architecture: 1 input (normalized time), tanh
/// hidden layers, 2 linear outputs (u, v).
struct SurrogateConfig {
  int hidden_layers = 5;
  int neurons_per_layer = 10;
  std::string activation = "tanh";
};

/// Per-layer weight matrices and bias vectors stored flat, layer by layer:
/// W (row-major, out x in) followed by b (out).
class SurrogateWeights {
 public:
  struct LayerShape {
    int in = 0;
    int out = 0;
    std::size_t w_off = 0;
    std::size_t b_off = 0;
  };

  SurrogateWeights() : SurrogateWeights(SurrogateConfig{}) {}
  explicit SurrogateWeights(const SurrogateConfig& cfg);

  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases,
  /// drawn from SplitMix64(seed) in flat storage order.
  static SurrogateWeights glorot(const SurrogateConfig& cfg, std::uint64_t seed);

  const SurrogateConfig& config() const { return cfg_; }
  const std::vector<LayerShape>& layers() const { return shapes_; }
  std::span<double> flat() { return flat_; }
  std::span<const double> flat() const { return flat_; }
  std::size_t size() const { return flat_.size(); }

 private:
  SurrogateConfig cfg_;
  std::vector<LayerShape> shapes_;
  std::vector<double> flat_;
};

/// Affine map from raw time on [0, 20] to the network input range [-1, 1].
inline constexpr double kTimeJacobian = 2.0 / (kTimeHi - kTimeLo);
inline double normalize_time(double t) { return (t - kTimeLo) * kTimeJacobian - 1.0; }

/// Feed-forward evaluation at normalized time. Returns (u_hat, v_hat).
std::array<double, 2> mlp_forward(const SurrogateWeights& w, double t_norm);

/// Derivative of the network output with respect to RAW time (the
/// normalization Jacobian is included). Takes normalized time like
/// mlp_forward.
std::array<double, 2> mlp_time_derivative(const SurrogateWeights& w, double t_norm);

/// Value and raw-time derivative in one pass.
void mlp_eval_with_time_derivative(const SurrogateWeights& w, double t_norm,
                                   std::array<double, 2>& value, std::array<double, 2>& deriv);

struct LossSpec {
  double data_weight = 1.0;
  double residual_weight = 1.0;
};

struct LossBreakdown {
  double data_mse = 0.0;
  double residual_mse = 0.0;
  double total = 0.0;
};

struct MechGrad {
  int param = 0;  // canonical index
  double grad = 0.0;
};

struct Gradients {
  LossBreakdown loss;
  std::vector<double> weight_grad;      // flat, aligned with SurrogateWeights
  std::vector<MechGrad> mechanism_grad;  // active parameters only, ascending index
};

/// Reverse-mode gradients of
///   data_weight * mean((surrogate - data)^2)
///   + residual_weight * mean((surrogate' - rhs(surrogate))^2)
/// with respect to every surrogate weight and every ACTIVE mechanism
/// parameter. Inactive parameters get no gradient entry. Throws
/// NumericalOverflowError when a loss term turns non-finite, naming the term.
Gradients grad_all(const SurrogateWeights& w, const ParameterState& state,
                   std::span<const DataPoint> batch, std::span<const double> collocation,
                   const LossSpec& spec);

/// Text checkpoint format: layer-tagged rows of decimal values, lossless
/// round-trip.
void save_weights(std::ostream& out, const SurrogateWeights& w);
SurrogateWeights load_weights(std::istream& in);

}  // namespace mechsel
