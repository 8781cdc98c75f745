#pragma once

#include <stdexcept>
#include <string>

namespace flowservo {

// Precondition violated by a caller (bad pixel, non-positive depth, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Scenario file could not be parsed or failed validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The sampling optimizer could not produce a single finite loss.
class OptimizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowservo
