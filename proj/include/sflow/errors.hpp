#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: misaligned grids, unknown keys, invalid parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments to a basis constructor.
class ConstructionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Time or point outside the domain an object is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Requested an operation the inputs cannot support (e.g. Jacobians of a
/// field without analytic gradients).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state during integration.
class BlowUpError : public Error {
 public:
  BlowUpError(std::size_t step, const std::string& what)
      : Error("blow-up at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Monte Carlo weights degenerated to a single sample (or none).
class UnderflowError : public Error {
 public:
  using Error::Error;
};

/// A trajectory left the closure of the domain it must stay in.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Point-in-cell lookup failed.
class PartitionError : public Error {
 public:
  using Error::Error;
};

/// Enumeration too large to evaluate.
class SizeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace sflow
