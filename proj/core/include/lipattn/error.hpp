#pragma once

#include <stdexcept>
#include <string>

namespace lipattn {

/// Shapes of two operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is outside the domain where the exact formula is defined
/// (zero-variance token for LayerNorm, zero weight in a similarity
/// transform, NaN entries, ...).
class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A construction needs a real eigenvalue of A and none exists.
class EmptySpectrumError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Size guards and resampling budgets.
class LimitExceededError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A measured Lipschitz constant exceeded an upper bound that must hold.
class BoundViolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lipattn
