#pragma once

#include <stdexcept>
#include <string>

namespace skelgrow {

// Exit codes used by the CLI: 0 ok, 2 validation, 3 numeric failure, 4 I/O.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitNumeric = 3,
  kExitIo = 4,
};

// Malformed inputs: bad shapes, out-of-range values, unknown config keys.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values produced during computation (NaN loss, diverged step).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and format failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace skelgrow
