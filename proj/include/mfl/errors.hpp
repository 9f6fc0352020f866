#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfl {

// Invalid user-supplied configuration (bad sizes, negative step sizes, unknown keys).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A step produced a non-finite entry or an entry beyond the divergence bound.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Floating-point breakdown that is not a divergence, e.g. a clearly negative
// variance in the noise factorization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An oracle computation could not produce a trustworthy answer.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Post-processing of records failed (too few rows, non-positive excess loss).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfl
