#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace defsc {

enum class ErrorCode {
  InvalidArgument,
  NonIntegrable,
  NonPositiveDensity,
  NoDensity,
  PoleOnSupport,
  NoConvergence,
  NegativeLambda,
  MultiIntervalUnsupported,
  DegenerateFit,
  DimensionMismatch,
  SupportViolation,
  EigenFailure,
  MissingVectors,
  SingularResolvent,
  EdgeDegeneracy,
  BranchAmbiguity,
  UnknownKind,
  ConfigError,
  InsufficientPoints,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every recoverable failure in the library. The code is
/// stable and is what callers (CLI exit codes, harness row status) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by iterative solvers; keeps the last iterate so callers can inspect it.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, std::complex<double> last_iterate, double residual)
      : Error(ErrorCode::NoConvergence, what), last_iterate_(last_iterate), residual_(residual) {}

  std::complex<double> last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  std::complex<double> last_iterate_;
  double residual_;
};

}  // namespace defsc
