#include "crackmc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crackmc/errors.hpp"

namespace crackmc {

void QoICurve::validate() const {
  if (times.size() != values.size())
    throw ArgumentError("QoICurve: times/values size mismatch");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
      throw ArgumentError("QoICurve: non-finite entry at index " +
                          std::to_string(i));
    if (i > 0 && !(times[i] > times[i - 1]))
      throw ArgumentError("QoICurve: times must be strictly increasing");
  }
}

double mc_mean(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("mc_mean: empty sample set");
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

double mc_variance(std::span<const double> values, bool unbiased) {
  if (values.empty()) throw ArgumentError("mc_variance: empty sample set");
  if (unbiased && values.size() < 2)
    throw ArgumentError("mc_variance: unbiased divisor needs >= 2 samples");
  const double mean = mc_mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  const double divisor =
      static_cast<double>(unbiased ? values.size() - 1 : values.size());
  return acc / divisor;
}

RateFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("fit_loglog: size mismatch");
  if (x.size() < 2) throw ArgumentError("fit_loglog: need >= 2 points");

  RateFit fit;
  for (double v : y) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fit.degenerate = true;
      return fit;
    }
  }
  for (double v : x) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ArgumentError("fit_loglog: abscissae must be positive");
  }

  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0)
    throw ArgumentError("fit_loglog: abscissae must be distinct");
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

RateFit mc_rate_study(
    const std::map<std::size_t, std::vector<double>>& errors_per_m) {
  if (errors_per_m.size() < 4)
    throw ArgumentError("mc_rate_study: need >= 4 sample-count levels, got " +
                        std::to_string(errors_per_m.size()));
  std::vector<double> ms, rms;
  for (const auto& [m, errors] : errors_per_m) {
    if (m == 0) throw ArgumentError("mc_rate_study: sample count 0");
    if (errors.empty())
      throw ArgumentError("mc_rate_study: no replicates for M = " +
                          std::to_string(m));
    double acc = 0.0;
    for (double e : errors) acc += e * e;
    ms.push_back(static_cast<double>(m));
    rms.push_back(std::sqrt(acc / static_cast<double>(errors.size())));
  }
  return fit_loglog(ms, rms);
}

ErrorDecomposition total_error_decomposition(
    const std::vector<std::pair<double, double>>& errors_h,
    const std::vector<std::pair<std::size_t, double>>& errors_m) {
  if (errors_h.size() < 2)
    throw ArgumentError("total_error_decomposition: need >= 2 mesh levels");
  if (errors_m.size() < 2)
    throw ArgumentError(
        "total_error_decomposition: need >= 2 sample-count levels");

  std::vector<double> hs, eh, ms, em;
  for (const auto& [h, err] : errors_h) {
    if (!(h > 0.0))
      throw ArgumentError("total_error_decomposition: h must be positive");
    if (!hs.empty() && !(h > hs.back()))
      throw ArgumentError(
          "total_error_decomposition: h grid must be strictly increasing");
    hs.push_back(h);
    eh.push_back(err);
  }
  for (const auto& [m, err] : errors_m) {
    const auto md = static_cast<double>(m);
    if (m == 0)
      throw ArgumentError("total_error_decomposition: sample count 0");
    if (!ms.empty() && !(md > ms.back()))
      throw ArgumentError(
          "total_error_decomposition: M grid must be strictly increasing");
    ms.push_back(md);
    em.push_back(err);
  }

  ErrorDecomposition out;
  out.spatial = fit_loglog(hs, eh);
  out.statistical = fit_loglog(ms, em);
  return out;
}

void McAccumulator::add(std::size_t sample_index, QoICurve curve) {
  curve.validate();
  for (const auto& [index, existing] : entries_) {
    (void)existing;
    if (index == sample_index)
      throw ArgumentError("McAccumulator: duplicate sample index " +
                          std::to_string(sample_index));
  }
  entries_.emplace_back(sample_index, std::move(curve));
}

void McAccumulator::merge(McAccumulator other) {
  for (auto& [index, curve] : other.entries_) {
    for (const auto& [existing_index, existing] : entries_) {
      (void)existing;
      if (existing_index == index)
        throw ArgumentError("McAccumulator: duplicate sample index " +
                            std::to_string(index) + " on merge");
    }
    entries_.emplace_back(index, std::move(curve));
  }
  other.entries_.clear();
}

McSummary McAccumulator::finalize(bool keep_per_sample) const {
  if (entries_.empty()) throw StateError("McAccumulator: no samples");

  std::vector<std::pair<std::size_t, QoICurve>> ordered(entries_);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const QoICurve& first = ordered.front().second;
  const std::size_t steps = first.times.size();
  for (const auto& [index, curve] : ordered) {
    if (curve.times != first.times)
      throw ArgumentError("McAccumulator: sample " + std::to_string(index) +
                          " has a different time grid");
  }

  const auto m = static_cast<double>(ordered.size());
  McSummary summary;
  summary.samples = ordered.size();
  summary.mean.times = first.times;
  summary.mean.values.assign(steps, 0.0);
  summary.variance.times = first.times;
  summary.variance.values.assign(steps, 0.0);

  // Fixed index-ordered summation: identical partial sums regardless of how
  // the samples were distributed over workers.
  for (const auto& [index, curve] : ordered) {
    (void)index;
    for (std::size_t k = 0; k < steps; ++k)
      summary.mean.values[k] += curve.values[k];
  }
  for (std::size_t k = 0; k < steps; ++k) summary.mean.values[k] /= m;
  for (const auto& [index, curve] : ordered) {
    (void)index;
    for (std::size_t k = 0; k < steps; ++k) {
      const double dev = curve.values[k] - summary.mean.values[k];
      summary.variance.values[k] += dev * dev;
    }
  }
  for (std::size_t k = 0; k < steps; ++k) summary.variance.values[k] /= m;

  summary.ci95.first.times = first.times;
  summary.ci95.second.times = first.times;
  summary.ci95.first.values.resize(steps);
  summary.ci95.second.values.resize(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double half = 1.96 * std::sqrt(summary.variance.values[k] / m);
    summary.ci95.first.values[k] = summary.mean.values[k] - half;
    summary.ci95.second.values[k] = summary.mean.values[k] + half;
  }

  if (keep_per_sample) {
    std::vector<QoICurve> per_sample;
    per_sample.reserve(ordered.size());
    for (auto& [index, curve] : ordered) {
      (void)index;
      per_sample.push_back(curve);
    }
    summary.per_sample_qoi = std::move(per_sample);
  }
  return summary;
}

}  // namespace crackmc
