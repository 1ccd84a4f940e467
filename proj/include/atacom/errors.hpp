#pragma once

#include <stdexcept>
#include <string>

namespace atacom {

/// Thrown when an argument violates a documented precondition
/// (non-finite entries, negative slack, out-of-range gains, ...).
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when the augmented Jacobian loses row rank, i.e. more
/// constraints are simultaneously active than the control input can
/// satisfy. The controller has no exact solution in this regime.
struct RankDeficiencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a constraint Jacobian has no kernel at all: the tangent
/// space is empty and the controller cannot act.
struct EmptyKernelError : RankDeficiencyError {
  using RankDeficiencyError::RankDeficiencyError;
};

/// Thrown when a reference frame does not match the kernel dimension.
struct FrameMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a problem variant needs data the caller did not supply
/// (e.g. second-order assembly without velocity or Jacobian rates).
struct IncompleteProblemError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Configuration parse/validation failure; message names the field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Environment runtime fault (non-finite control, broken dynamics).
struct EnvFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace atacom
