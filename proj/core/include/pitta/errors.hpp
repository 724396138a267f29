#pragma once

#include <stdexcept>
#include <string>

namespace pitta {

/// Error categories, used as process exit codes by the CLI.
enum class ErrorCategory : int {
  config = 2,
  input = 3,
  numeric = 4,
  io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

/// Invalid configuration value or inconsistent settings.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// Bad runtime input: shape mismatches, out-of-range data, API misuse.
struct InputError : Error {
  explicit InputError(const std::string& what) : Error(ErrorCategory::input, what) {}
};

/// Numerical failure: non-finite values, behind-camera projection, divergence.
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

/// File system and codec failures.
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

}  // namespace pitta
