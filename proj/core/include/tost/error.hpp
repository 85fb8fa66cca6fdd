#pragma once

#include <stdexcept>
#include <string>

namespace tost {

// Error taxonomy used across the library. Callers that need to distinguish
// failure modes catch the concrete type; everything derives from Error.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch between operands (wrong rows/cols, non-square, ...).
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Input values violate a contract (non-finite entries, rows not stochastic).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// An iterative method failed to converge within its cap.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// A stated precondition does not hold (e.g. image condition of a bank).
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& msg) : Error(msg) {}
};

// Invalid experiment/benchmark specification (empty grid, zero trials, ...).
class SpecError : public Error {
 public:
  explicit SpecError(const std::string& msg) : Error(msg) {}
};

// A group with (numerically) zero total membership mass.
class DegenerateGroupError : public Error {
 public:
  explicit DegenerateGroupError(const std::string& msg) : Error(msg) {}
};

}  // namespace tost
