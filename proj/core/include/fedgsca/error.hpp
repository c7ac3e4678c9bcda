#pragma once

#include <stdexcept>
#include <string>

namespace fedgsca {

/// Raised when a user-supplied spec, manifest or config violates its
/// invariants. `field()` carries a dotted path such as
/// `noise.per_client[0].rate`.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Tensor or feature dimension mismatch.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure during training (non-finite gradients or parameters).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedgsca
