#pragma once

#include <stdexcept>
#include <string>

namespace tilt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (x outside [0,1],
/// a zero probability in the second slot of a KL divergence, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data contains NaN/Inf or has inconsistent sizes.
class DataError : public Error {
 public:
  using Error::Error;
};

/// The normal equations of a fit are singular.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(std::string block, const std::string& what)
      : Error(what), block_(std::move(block)) {}
  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; `field` is a dotted path into the config document.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace tilt
