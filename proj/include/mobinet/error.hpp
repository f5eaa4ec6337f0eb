#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mobinet {

/// Precondition violated by the caller (bad shapes, empty inputs, bad parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing, unreadable or corrupt file. The message names the file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter estimation could not proceed (degenerate data).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quantity is mathematically undefined for the given input (0/0 and friends).
class UndefinedValue : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bad run configuration (config file, CLI flags, incompatible artifacts).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wraps a failure with the pipeline stage it happened in: "[stage] what".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace mobinet
