#pragma once

#include <stdexcept>
#include <string>

namespace ofs {

// Base for every error raised by the library. The CLI maps these to exit code 1;
// ConfigError maps to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs outside an operation's mathematical domain (non-PD matrix, bad
// parameter value, empty sample).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

// Raised when a model capability (score, simulator, analytic P/Q) is requested
// but not provided. Never answered by a silent fallback.
class UnsupportedCapability : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ofs
