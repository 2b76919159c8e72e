#pragma once

#include <stdexcept>
#include <string>

namespace modechain {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data: bad sequences, ids out of range, corrupt files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or degenerate numerics.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A chain stage failed; the message is prefixed with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace modechain
