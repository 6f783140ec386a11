#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crackmc/estimators.hpp"
#include "crackmc/fem.hpp"
#include "crackmc/microstructure.hpp"
#include "crackmc/perturbation.hpp"
#include "crackmc/solver.hpp"

namespace crackmc {

struct ModelConfig {
  int dimension = 1;
  Box box;
  std::array<int, 2> divisions{32, 1};
  MaterialParams material;
  std::optional<MaterialParams> inclusion_material;
  double void_scaling = 1e-6;  // K, mu, psi_c multiplier inside voids
  bool plasticity = false;
};

struct LoadingConfig {
  int steps = 20;
  double t_end = 1.0;
  double u_end = 0.05;
  std::string bc = "uniaxial_x";
};

struct SamplingConfig {
  std::size_t samples = 16;
  std::uint64_t seed = 0;
  int threads = 1;  // 0 picks the hardware count
  bool keep_per_sample = true;
  bool unbiased_variance = false;
};

struct MicrostructureConfig {
  double target_voids = 0.0;
  double target_inclusions = 0.0;
  RadiusRange void_radius;
  RadiusRange inclusion_radius;
  double gamma = 0.1;
  std::size_t max_attempts = 100000;
  PairEnlargement pair_rule = PairEnlargement::inclusions;
};

struct RateStudyConfig {
  std::vector<std::size_t> m_levels{16, 64, 256, 1024};
  int replicates = 8;
  std::vector<int> h_divisions;  // empty disables the mesh branch
};

struct CampaignConfig {
  ModelConfig model;
  LoadingConfig loading;
  SolverConfig solver;
  PerturbedParameterSet perturbation;
  std::optional<MicrostructureConfig> microstructure;
  SamplingConfig sampling;
  RateStudyConfig rate_study;
  std::string output_dir = "out";
  bool write_fields = false;  // VTK snapshot of each sample's final state

  void validate() const;
};

/// Strict parse: unknown keys, missing schema_version, or out-of-range
/// values throw ConfigError.  The hash is over the raw text.
CampaignConfig parse_config(const std::string& json_text);
CampaignConfig load_config_file(const std::string& path);
std::uint64_t config_hash(const std::string& json_text);

struct SampleFailure {
  std::size_t sample = 0;
  std::uint64_t stream_id = 0;
  std::string error;
};

struct CampaignResult {
  McSummary summary;
  std::vector<double> displacement;  // load factor per step
  std::vector<SampleFailure> failures;
  std::size_t samples_requested = 0;
  std::uint64_t master_seed = 0;
};

/// One forward run: microstructure draw (when configured), parameter
/// realization, incremental solve.  The stream is consumed sequentially,
/// so sample i is fully reproducible from (seed, stream_id = i).
QoICurve run_single(const CampaignConfig& config, RandomStream stream);

/// Monte Carlo campaign over sampling.samples forward runs.  Per-sample
/// failures are recorded and excluded from the estimators, never silently
/// dropped.  With out_dir nonempty, writes per-sample CSVs, summary.csv,
/// and manifest.json; summary bytes are identical for any thread count.
CampaignResult run_campaign(const CampaignConfig& config,
                            const std::string& out_dir,
                            const std::string& config_text);

struct RateStudyResult {
  RateFit statistical;                       // Monte Carlo branch
  std::map<std::size_t, double> rms_per_m;
  double reference = 0.0;                    // pooled QoI mean
  std::optional<RateFit> spatial;            // mesh branch (when enabled)
  std::vector<std::pair<double, double>> errors_h;
};

/// Convergence-rate study: replicated Monte Carlo estimators against a
/// pooled reference, plus an optional manufactured-solution mesh sweep.
/// Writes rates.json and per-branch CSVs when out_dir is nonempty.
RateStudyResult run_rate_study(const CampaignConfig& config,
                               const std::string& out_dir,
                               const std::string& config_text);

/// Shared 17-significant-digit numeric formatting for CSV output.
std::string format_full(double v);

}  // namespace crackmc
