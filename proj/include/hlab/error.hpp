#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hlab {

// Base of every exception thrown by the library. The C API maps these onto
// hlab_status codes (see hlab.h).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid argument to a pure function (eps <= 0, p <= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A non-finite value appeared while iterating. `step` is the iteration index.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::uint64_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

// A rate construction was requested without one of the hypotheses it needs.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

// Malformed experiment configuration. `field` names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hlab
