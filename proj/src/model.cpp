#include "mechsel/model.hpp"

#include <cmath>
#include <string>

namespace mechsel {

namespace {

constexpr std::string_view kParamNames[kNumParams] = {
    "alpha0", "alpha1", "alpha2", "alpha3", "alpha4", "beta0", "beta1", "beta2",
    "beta3",  "beta4",  "r",      "a1",     "a2",     "b1",    "b2",
};

constexpr double kSingularTol = 1e-12;

}  // namespace

std::string_view param_name(int index) {
  if (index < 0 || index >= kNumParams) throw InvalidInputError("parameter index out of range");
  return kParamNames[index];
}

int param_index(std::string_view name) {
  for (int i = 0; i < kNumParams; ++i) {
    if (kParamNames[i] == name) return i;
  }
  throw InvalidInputError("unknown parameter name '" + std::string(name) + "'");
}

std::string_view to_string(PhaseClass c) {
  switch (c) {
    case PhaseClass::StableCoexistence: return "StableCoexistence";
    case PhaseClass::ExclusionUWins: return "ExclusionUWins";
    case PhaseClass::ExclusionVWins: return "ExclusionVWins";
    case PhaseClass::FounderControl: return "FounderControl";
    case PhaseClass::Degenerate: return "Degenerate";
  }
  return "?";
}

double ParameterState::value(int index) const {
  if (index < 5) return augment.alpha[static_cast<std::size_t>(index)];
  if (index < 10) return augment.beta[static_cast<std::size_t>(index - 5)];
  switch (index) {
    case kGrowthR: return base.r;
    case kA1: return base.a1;
    case kA2: return base.a2;
    case kB1: return base.b1;
    case kB2: return base.b2;
    default: throw InvalidInputError("parameter index out of range");
  }
}

void ParameterState::set_value(int index, double v) {
  if (index < 0) throw InvalidInputError("parameter index out of range");
  if (index < 5) {
    augment.alpha[static_cast<std::size_t>(index)] = v;
  } else if (index < 10) {
    augment.beta[static_cast<std::size_t>(index - 5)] = v;
  } else {
    switch (index) {
      case kGrowthR: base.r = v; break;
      case kA1: base.a1 = v; break;
      case kA2: base.a2 = v; break;
      case kB1: base.b1 = v; break;
      case kB2: base.b2 = v; break;
      default: throw InvalidInputError("parameter index out of range");
    }
  }
}

std::array<double, kNumParams> ParameterState::effective_values() const {
  std::array<double, kNumParams> p{};
  for (int i = 0; i < kNumParams; ++i) p[static_cast<std::size_t>(i)] = effective(i);
  return p;
}

ParameterState ParameterState::full_family(const BaseParams& base) {
  ParameterState s;
  s.base = base;
  s.mask.fill(true);
  return s;
}

ParameterState ParameterState::base_only(const BaseParams& base) {
  ParameterState s;
  s.base = base;
  for (int i = kGrowthR; i <= kB2; ++i) s.mask[static_cast<std::size_t>(i)] = true;
  return s;
}

int active_parameter_count(const ParameterState& state) {
  int n = 0;
  for (bool m : state.mask) n += m ? 1 : 0;
  return n;
}

std::pair<double, double> rhs_full(const ParameterState& state, double u, double v) {
  if (!std::isfinite(u) || !std::isfinite(v)) throw InvalidInputError("rhs_full: non-finite state");
  const std::array<double, kNumParams> p = state.effective_values();
  double du = 0.0, dv = 0.0;
  rhs_terms(p, u, v, du, dv);
  return {du, dv};
}

std::pair<double, double> coexistence_equilibrium(const BaseParams& base) {
  const double det = base.a1 * base.b2 - base.a2 * base.b1;
  if (std::fabs(det) < kSingularTol) {
    throw DegenerateNullclinesError("coexistence_equilibrium: nullclines are (near-)parallel");
  }
  return {(base.b2 - base.a2) / det, (base.a1 - base.b1) / det};
}

PhaseClass classify_phase(const BaseParams& base) {
  const bool finite = std::isfinite(base.r) && std::isfinite(base.a1) && std::isfinite(base.a2) &&
                      std::isfinite(base.b1) && std::isfinite(base.b2);
  if (!finite || base.r <= 0 || base.a1 <= 0 || base.a2 <= 0 || base.b1 <= 0 || base.b2 <= 0) {
    throw InvalidInputError("classify_phase: coefficients must be finite and positive");
  }
  if (base.a1 > base.b1 && base.a2 < base.b2) return PhaseClass::StableCoexistence;
  if (base.a1 < base.b1 && base.a2 > base.b2) return PhaseClass::FounderControl;
  if (base.a1 < base.b1 && base.a2 < base.b2) return PhaseClass::ExclusionUWins;
  if (base.a1 > base.b1 && base.a2 > base.b2) return PhaseClass::ExclusionVWins;
  return PhaseClass::Degenerate;  // some intercept pair coincides
}

}  // namespace mechsel
