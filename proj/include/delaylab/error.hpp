#pragma once

#include <stdexcept>
#include <string>

namespace delaylab {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A result left the representable range (NaN/Inf or beyond a hard cap).
class NumericRangeError : public Error {
 public:
  using Error::Error;
};

/// Matrix rejected by the pivot threshold of the LU factorization.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}

  /// Ratio of the largest entry to the smallest accepted/rejected pivot.
  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Iterative method did not meet its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double oscillation)
      : Error(what), oscillation_(oscillation) {}

  /// Larger of the relative spread of the last Rayleigh quotients and the
  /// final relative residual; O(1) values point to a complex dominant pair
  /// rather than slow convergence.
  double oscillation() const noexcept { return oscillation_; }

 private:
  double oscillation_;
};

/// A time argument does not fall on the signal grid.
class GridAlignmentError : public Error {
 public:
  using Error::Error;
};

/// I - DΓ is singular: Γ is not an admissible feedback operator.
class AdmissibilityError : public Error {
 public:
  using Error::Error;
};

/// λ lies in (or numerically on) the spectrum of an operator being inverted.
class SpectrumError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a formula (e.g. Re λ <= -μ∞).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Scenario / model configuration rejected.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Growth-rate fit impossible on the requested window.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Simulation left the representable range.
class OverflowError : public Error {
 public:
  OverflowError(const std::string& what, double last_valid_time)
      : Error(what), last_valid_time_(last_valid_time) {}

  double last_valid_time() const noexcept { return last_valid_time_; }

 private:
  double last_valid_time_;
};

}  // namespace delaylab
