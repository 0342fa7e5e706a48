#pragma once

#include <array>
#include <string_view>
#include <utility>

#include "mechsel/errors.hpp"

namespace mechsel {

/// Number of trainable coefficients in the augmented competition family:
/// ten augmentation terms plus the five structural coefficients.
inline constexpr int kNumParams = 15;

// Canonical parameter order. Augmentation coefficients come first because
// elimination ties break toward them; the structural block follows.
enum ParamIndex : int {
  kAlpha0 = 0,
  kAlpha1,
  kAlpha2,
  kAlpha3,
  kAlpha4,
  kBeta0,
  kBeta1,
  kBeta2,
  kBeta3,
  kBeta4,
  kGrowthR,
  kA1,
  kA2,
  kB1,
  kB2,
};

/// Canonical name ("alpha0".."beta4", "r", "a1", "a2", "b1", "b2").
std::string_view param_name(int index);

/// Inverse of param_name. Throws InvalidInputError for unknown names.
int param_index(std::string_view name);

/// Structural coefficients of the base competition model
///   u' = u (1 - a1 u - a2 v),  v' = r v (1 - b1 u - b2 v).
struct BaseParams {
  double r = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
};

/// Coefficients of the added mechanisms {1, u, v, u^2 v, u v^2} per equation.
struct AugmentParams {
  std::array<double, 5> alpha{};
  std::array<double, 5> beta{};
};

/// Long-time regime of the base competition model.
enum class PhaseClass {
  StableCoexistence,
  ExclusionUWins,
  ExclusionVWins,
  FounderControl,
  Degenerate,
};

std::string_view to_string(PhaseClass c);

/// Parameter values plus the per-parameter active mask. Inactive parameters
/// contribute exactly zero to the right-hand side regardless of their stored
/// value.
struct ParameterState {
  BaseParams base;
  AugmentParams augment;
  std::array<bool, kNumParams> mask{};

  double value(int index) const;
  void set_value(int index, double v);

  /// Stored value if active, hard zero otherwise.
  double effective(int index) const { return mask[static_cast<std::size_t>(index)] ? value(index) : 0.0; }

  /// All fifteen effective coefficients in canonical order.
  std::array<double, kNumParams> effective_values() const;

  /// All fifteen parameters active.
  static ParameterState full_family(const BaseParams& base = {});

  /// Only the five structural parameters active; augmentation masked out.
  static ParameterState base_only(const BaseParams& base);
};

int active_parameter_count(const ParameterState& state);

// Right-hand side of the augmented family for any scalar type that supports
// +, -, * with itself and with double. The double instantiation is the
// production path; the autodiff tape instantiates it with tape variables so
// both paths share one formula. `p` holds effective coefficients in
// canonical order.
template <class S>
void rhs_terms(const std::array<S, kNumParams>& p, const S& u, const S& v, S& du, S& dv) {
  const S u2v = (u * u) * v;
  const S uv2 = u * (v * v);
  du = u * (1.0 - p[kA1] * u - p[kA2] * v) + (((p[kAlpha0] + p[kAlpha1] * u) + p[kAlpha2] * v) + p[kAlpha3] * u2v) +
       p[kAlpha4] * uv2;
  dv = p[kGrowthR] * (v * (1.0 - p[kB1] * u - p[kB2] * v)) +
       (((p[kBeta0] + p[kBeta1] * u) + p[kBeta2] * v) + p[kBeta3] * u2v) + p[kBeta4] * uv2;
}

/// Evaluates the augmented right-hand side at (u, v) with inactive
/// parameters masked to zero. Throws InvalidInputError on non-finite input.
std::pair<double, double> rhs_full(const ParameterState& state, double u, double v);

/// Unique intersection of the two nullclines a1 u + a2 v = 1 and
/// b1 u + b2 v = 1. Throws DegenerateNullclinesError when the system is
/// singular (|a1 b2 - a2 b1| < 1e-12).
std::pair<double, double> coexistence_equilibrium(const BaseParams& base);

/// Standard nullcline-intercept classification of the long-time regime.
/// Requires finite, positive coefficients.
PhaseClass classify_phase(const BaseParams& base);

}  // namespace mechsel
