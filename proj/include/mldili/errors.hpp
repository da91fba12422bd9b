#pragma once

#include <stdexcept>
#include <string>

namespace mldili {

// Invalid configuration or user input; CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched vector/matrix sizes or an operation applied at the wrong level.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Solver/eigensolver breakdowns; CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mldili
