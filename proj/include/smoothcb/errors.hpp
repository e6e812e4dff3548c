#pragma once

#include <stdexcept>
#include <string>

namespace smoothcb {

// Precondition failures on caller-supplied values.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value left its documented range (e.g. a loss outside [0,1]).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Mutating calls issued in an order the state machine does not allow.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Bad experiment configuration (unknown names, missing metadata).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, double achieved, double target)
      : std::runtime_error(what), achieved_(achieved), target_(target) {}

  double achieved() const noexcept { return achieved_; }
  double target() const noexcept { return target_; }

 private:
  double achieved_;
  double target_;
};

}  // namespace smoothcb
