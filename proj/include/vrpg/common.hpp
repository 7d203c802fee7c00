#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace vrpg {

/// Flat policy parameter vector. Every policy maps its weights onto one of these.
using ParamVector = Eigen::VectorXd;

/// Raised when components are wired together inconsistently (e.g. a theta
/// whose dimension does not match the policy).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid call arguments (empty batches, zero budgets, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces or consumes non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a model definition (e.g. a tabular MDP) is malformed.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the text parsers; the message carries the offending line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace vrpg
