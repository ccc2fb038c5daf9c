#pragma once

#include <stdexcept>
#include <string>

namespace cvcqd {

// Operation applied to a state that cannot support it (consumed mode,
// non-PSD covariance, ...).
class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A protocol step was invoked out of the order the parties agreed on.
class ProtocolOrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A numeric formula was evaluated outside its domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An internal invariant that should hold by construction did not.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cvcqd
