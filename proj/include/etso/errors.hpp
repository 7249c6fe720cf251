#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace etso {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition on an argument violated (dimension mismatch, empty set, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Symmetric positive definite factorization failed even after jitter escalation.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t dataset_size, double jitter)
      : Error(what), dataset_size_(dataset_size), jitter_(jitter) {}

  std::size_t dataset_size() const noexcept { return dataset_size_; }
  double jitter() const noexcept { return jitter_; }

 private:
  std::size_t dataset_size_;
  double jitter_;
};

/// Invalid configuration value or unreadable configuration document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A scenario id or configuration path that does not resolve to a document.
class NotFoundError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// The backup controller does not clear the critical cost in the current mode.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// A record or scenario document does not match the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace etso
