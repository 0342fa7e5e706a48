#pragma once

#include <stdexcept>
#include <string>

namespace mechsel {

/// An operation received non-finite or otherwise unusable input.
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// The nullcline system is singular (parallel or identical nullclines).
struct DegenerateNullclinesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An integrated solution left the admissible box [-1e6, 1e6].
struct BlowUpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A query time lies outside the span of the stored trajectory.
struct OutOfRangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// A dataset window falls outside the supported integration span.
struct InvalidWindowError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A loss or gradient evaluation produced a non-finite intermediate.
struct NumericalOverflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// No active, unprotected parameter is available for elimination.
struct NothingToEliminateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The derivative regression cannot identify the growth-rate ratio.
struct DegenerateRecoveryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A configuration document is malformed; the message names the key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mechsel
