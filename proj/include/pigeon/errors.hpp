#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pigeon {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched lengths or otherwise malformed operands.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation (even Wheel size, bad index).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Request exceeds a hard size cap (dense oracle, exhaustive search).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Pre- and postselection are (numerically) orthogonal.
class SingularOverlapError : public Error {
 public:
  using Error::Error;
};

/// Projector weak values of a basis do not sum to one.
class CompletenessError : public Error {
 public:
  using Error::Error;
};

/// Sine fit did not converge. Carries the residual sum of squares per iteration.
class FitError : public Error {
 public:
  FitError(const std::string& what, std::vector<double> residual_trace)
      : Error(what), residual_trace_(std::move(residual_trace)) {}

  const std::vector<double>& residual_trace() const noexcept { return residual_trace_; }

 private:
  std::vector<double> residual_trace_;
};

/// Weak-value inversion from interferometer intensities is singular.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed input data (tables, interferogram files).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace pigeon
