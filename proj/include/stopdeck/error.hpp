#pragma once

#include <stdexcept>
#include <string>

namespace stopdeck {

// Invalid configuration or parameters supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while running a computation (I/O, numerical breakdown, ...).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stopdeck
