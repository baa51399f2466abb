#pragma once

#include <stdexcept>

namespace tiger {

/// Operand shapes disagree. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside an operation's domain (empty softmax, illegal action, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Optimizer or learner hit a non-finite quantity.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or unsatisfiable configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal data structures disagree with each other.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tiger
