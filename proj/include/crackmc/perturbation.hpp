#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "crackmc/random_stream.hpp"

namespace crackmc {

enum class PerturbationMode { homogeneous, heterogeneous };

/// Baseline parameter record plus uniform perturbation amplitudes.
/// A realized value is baseline + eta * theta with theta ~ U[-1, 1]:
/// one theta per parameter in homogeneous mode, one per evaluation point
/// in heterogeneous mode.
struct PerturbedParameterSet {
  std::map<std::string, double> baseline;
  std::map<std::string, double> eta;
  PerturbationMode mode = PerturbationMode::homogeneous;

  /// Throws ConfigError on unknown names, negative amplitudes, amplitudes
  /// without a baseline, or amplitudes that could push a positive quantity
  /// to zero or below.
  void validate() const;
};

bool is_known_parameter(const std::string& name);

/// Parameters that must remain strictly positive after perturbation.
bool is_positivity_constrained(const std::string& name);

/// Realized values per parameter; vectors have length 1 (homogeneous) or
/// n_points (heterogeneous).  Draw order is fixed by the sorted parameter
/// names, so a given (stream, n_points) always yields the same field.
std::map<std::string, std::vector<double>> realize_parameters(
    const PerturbedParameterSet& pset, RandomStream& rng, std::size_t n_points);

}  // namespace crackmc
