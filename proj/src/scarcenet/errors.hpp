#pragma once

#include <stdexcept>
#include <string>

namespace scarcenet {

// Error categories map one-to-one onto the C API status codes and the CLI
// exit codes. std::invalid_argument is used for precondition violations.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateTransform : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace scarcenet
