#include "crackmc/perturbation.hpp"

#include <array>
#include <cmath>

#include "crackmc/errors.hpp"

namespace crackmc {

namespace {

constexpr std::array<const char*, 7> kKnownNames = {
    "E", "mu", "K", "G_c", "psi_c", "H", "sigma_Y"};

constexpr std::array<const char*, 6> kPositiveNames = {
    "E", "mu", "K", "sigma_Y", "psi_c", "G_c"};

}  // namespace

bool is_known_parameter(const std::string& name) {
  for (const char* known : kKnownNames)
    if (name == known) return true;
  return false;
}

bool is_positivity_constrained(const std::string& name) {
  for (const char* positive : kPositiveNames)
    if (name == positive) return true;
  return false;
}

void PerturbedParameterSet::validate() const {
  for (const auto& [name, value] : baseline) {
    if (!is_known_parameter(name))
      throw ConfigError("unknown parameter '" + name + "'");
    if (!std::isfinite(value))
      throw ConfigError("baseline for '" + name + "' is not finite");
  }
  for (const auto& [name, amplitude] : eta) {
    if (!is_known_parameter(name))
      throw ConfigError("unknown parameter '" + name + "' in eta");
    if (!std::isfinite(amplitude) || amplitude < 0.0)
      throw ConfigError("perturbation amplitude for '" + name +
                        "' must be finite and >= 0");
    auto base = baseline.find(name);
    if (base == baseline.end())
      throw ConfigError("eta given for '" + name + "' without a baseline");
    if (amplitude > 0.0 && is_positivity_constrained(name) &&
        amplitude >= base->second)
      throw ConfigError("eta for '" + name +
                        "' reaches zero or below: require eta < baseline");
  }
}

std::map<std::string, std::vector<double>> realize_parameters(
    const PerturbedParameterSet& pset, RandomStream& rng,
    std::size_t n_points) {
  pset.validate();
  if (n_points == 0) throw ArgumentError("realize_parameters: n_points == 0");

  const std::size_t per_param =
      pset.mode == PerturbationMode::heterogeneous ? n_points : 1;

  std::map<std::string, std::vector<double>> realized;
  for (const auto& [name, base] : pset.baseline) {
    auto it = pset.eta.find(name);
    const double amplitude = it == pset.eta.end() ? 0.0 : it->second;
    std::vector<double> values(per_param, base);
    if (amplitude > 0.0) {
      for (double& v : values) v = base + amplitude * rng.symmetric_unit();
    }
    realized.emplace(name, std::move(values));
  }
  return realized;
}

}  // namespace crackmc
