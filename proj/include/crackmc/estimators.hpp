#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace crackmc {

/// One quantity-of-interest trace over the load history.
struct QoICurve {
  std::vector<double> times;
  std::vector<double> values;

  /// Throws ArgumentError unless times are strictly increasing, sizes match,
  /// and every entry is finite.
  void validate() const;
};

struct McSummary {
  std::size_t samples = 0;
  QoICurve mean;
  QoICurve variance;                  // population variance, divisor M
  std::pair<QoICurve, QoICurve> ci95; // (lower, upper) normal band
  std::optional<std::vector<QoICurve>> per_sample_qoi;
};

/// Plain sample mean; empty input is an ArgumentError.
double mc_mean(std::span<const double> values);

/// Mean square deviation from the sample mean.  Divisor is the sample count;
/// pass unbiased = true for the M-1 divisor (needs at least 2 values).
double mc_variance(std::span<const double> values, bool unbiased = false);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;   // of the log-log line
  bool degenerate = false;  // a level had zero (or non-finite) error
};

/// Ordinary least squares of log(y) against log(x).
RateFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// Convergence-rate fit for Monte Carlo errors: per sample-count level the
/// replicate errors are RMS-pooled, then slope of log(error) vs log(M) is
/// fitted.  Requires at least 4 distinct levels with nonempty replicates.
RateFit mc_rate_study(
    const std::map<std::size_t, std::vector<double>>& errors_per_m);

struct ErrorDecomposition {
  RateFit spatial;      // log error vs log h, slope = discretization order
  RateFit statistical;  // log error vs log M, slope close to -1/2
};

/// Fits the two error branches of error(h, M) = a h^nu + b M^{-1/2} from
/// one-dimensional sweeps.  Each grid needs >= 2 strictly increasing levels.
ErrorDecomposition total_error_decomposition(
    const std::vector<std::pair<double, double>>& errors_h,
    const std::vector<std::pair<std::size_t, double>>& errors_m);

/// Collects per-sample curves keyed by sample index.  finalize() sums in
/// index order, so any partition of the samples over workers, merged in any
/// order, reproduces the single-worker summary bit for bit.
class McAccumulator {
 public:
  void add(std::size_t sample_index, QoICurve curve);
  void merge(McAccumulator other);
  McSummary finalize(bool keep_per_sample = false) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::size_t, QoICurve>> entries_;
};

}  // namespace crackmc
