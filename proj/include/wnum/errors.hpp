#pragma once

#include <stdexcept>
#include <string>

namespace wnum {

// Non-finite or otherwise out-of-domain numeric input.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Bearing between coincident points.
class DegenerateBearingError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Mismatched container sizes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke a documented precondition that is not just a size mismatch.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class InfeasibleScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MetricUndefinedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable or corrupt data file (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wnum
