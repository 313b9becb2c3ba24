#pragma once

#include <stdexcept>
#include <string>

namespace polyparse {

// Base for all library failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data (files, text). Carries the offending line when known.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what, long line = -1)
      : Error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// A caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Configuration or command-line arguments failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace polyparse
