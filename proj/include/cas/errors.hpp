#pragma once

#include <stdexcept>
#include <string>

namespace cas {

/// Malformed input: bad configuration, shape mismatch, unparsable file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mixture failed validation. Carries the human-readable report.
class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Factorization failure, non-finite state, quadrature that did not converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cas
