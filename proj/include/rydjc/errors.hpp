#pragma once

#include <stdexcept>
#include <string>

namespace rydjc {

/// Invalid argument to a library call (out-of-range index, negative time, bad probability).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Requested size exceeds what the implementation supports (e.g. more than 24 atoms).
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Two atoms at the same point, where C6/R^6 diverges.
class SingularityError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// A propagator could not meet its accuracy contract.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double worst_error)
      : std::runtime_error(what + " (worst error " + std::to_string(worst_error) + ")"),
        worst_error_(worst_error) {}

  double worst_error() const noexcept { return worst_error_; }

 private:
  double worst_error_;
};

/// Configuration file problem; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Monte Carlo run lost too many configurations to integration failures.
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rydjc
