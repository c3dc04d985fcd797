#pragma once

#include <stdexcept>
#include <string>

namespace dilgp {

/// Shape disagreement between two operands. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN or infinity found in an input that must be finite.
class NonFiniteInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training stopped early; the partially filled trace is still available to
/// callers that caught this through the train_* result types.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dilgp
