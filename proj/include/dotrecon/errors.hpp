#pragma once

#include <stdexcept>
#include <string>

namespace dotrecon {

/// Base class for all library failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad user-facing input: config values, domain specs, inconsistent arguments.
struct ValidationError : Error {
  using Error::Error;
};

/// Math-side failure: argument outside a function's domain, positivity or
/// model-assumption violations, solver breakdown.
struct NumericError : Error {
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
struct DomainError : NumericError {
  using NumericError::NumericError;
};

/// Evaluation at (or too close to) a singular point.
struct SingularityError : NumericError {
  using NumericError::NumericError;
};

/// A quantity required to be positive is not.
struct PositivityError : NumericError {
  using NumericError::NumericError;
};

/// Iterative solver did not reach the requested tolerance.
struct NonConvergenceError : NumericError {
  NonConvergenceError(const std::string& msg, double residual, int iterations)
      : NumericError(msg), residual(residual), iterations(iterations) {}
  double residual;
  int iterations;
};

/// Point lies outside the source mesh during field transfer.
struct OutOfDomainError : NumericError {
  using NumericError::NumericError;
};

/// Filesystem or parse failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dotrecon
