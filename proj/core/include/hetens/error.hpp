#pragma once

#include <stdexcept>
#include <string>

namespace hetens {

// Errors are grouped by the stage that raises them so front ends can map
// them onto distinct exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unusable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A training or evaluation step could not be completed.
class ComputeError : public Error {
 public:
  using Error::Error;
};

}  // namespace hetens
