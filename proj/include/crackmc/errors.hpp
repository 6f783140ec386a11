#pragma once

#include <stdexcept>
#include <string>

namespace crackmc {

/// Invalid user-supplied configuration, rejected before any computation runs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument to a library call.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An object was observed in a state that violates one of its invariants.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A numerical procedure failed (non-convergence, singular system, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem problem while reading inputs or writing results.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sequential particle placement ran out of attempts before reaching the
/// target fractions.  Carries the fractions reached so callers can report
/// how far the packing got.
class PackingSaturated : public std::runtime_error {
 public:
  PackingSaturated(const std::string& msg, double voids, double inclusions)
      : std::runtime_error(msg),
        achieved_voids(voids),
        achieved_inclusions(inclusions) {}

  double achieved_voids;
  double achieved_inclusions;
};

}  // namespace crackmc
