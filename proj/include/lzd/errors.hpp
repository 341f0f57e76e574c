#pragma once

#include <stdexcept>
#include <string>

namespace lzd {

/// Malformed or non-finite input (parameters, states, config values).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A bias profile that cannot be used for the requested operation.
class InvalidProfile : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Argument outside the domain of a closed-form expression.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The gap rotation is undefined because |Δ₁| = 0.
class UndefinedRotation : public DomainError {
 public:
  using DomainError::DomainError;
};

/// The pseudo-norm grew past what integration error can explain.
class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Objective is too flat over the bounds to resolve the decoherence rate.
class Unidentifiable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lzd
