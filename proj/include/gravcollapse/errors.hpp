#pragma once

#include <stdexcept>
#include <string>

namespace gravcollapse {

// Invalid numeric input to an estimator or operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A documented precondition on a state argument does not hold.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite amplitudes or positions appeared during time integration.
// `diagnostic` carries a JSON payload describing where it happened.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, std::string diagnostic)
      : std::runtime_error(what), diagnostic_(std::move(diagnostic)) {}
  const std::string& diagnostic() const noexcept { return diagnostic_; }

 private:
  std::string diagnostic_;
};

// Configuration parse or validation failure.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gravcollapse
