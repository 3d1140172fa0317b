#pragma once

#include <stdexcept>
#include <string>

namespace mvmc {

// Error taxonomy mirrored by the CLI exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& msg, double residual)
      : std::runtime_error(msg), last_residual(residual) {}
  double last_residual;
};

struct ArtifactMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mvmc
