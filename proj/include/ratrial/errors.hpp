#pragma once

#include <stdexcept>

namespace ratrial {

/// Malformed or inconsistent user configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The constrained problem admits no feasible policy (or repair failed).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: iteration caps, degenerate tableaus.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ratrial
