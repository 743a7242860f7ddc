#pragma once

#include <stdexcept>
#include <string>

namespace cpe {

/// Raised when an input violates an operation's precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Point or domain dimensions disagree.
class DimensionMismatch : public PreconditionError {
 public:
  DimensionMismatch(int expected, int actual)
      : PreconditionError("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                          std::to_string(actual)) {}
};

/// A numerical procedure cannot produce a trustworthy result (acceptance
/// collapse, truncation cap exceeded, too few usable points).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cpe
