#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

#include "crackmc/microstructure.hpp"

namespace testsupport {

/// Tanh-sinh quadrature of f over [a, b].  Handles integrable endpoint
/// singularities like sqrt(1-b); refines until two halvings agree.
inline double tanh_sinh(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-13) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double t_max = 3.7;  // abscissas underflow past this
  double previous = 0.0;
  for (int level = 2; level <= 12; ++level) {
    const double h = t_max / std::ldexp(1.0, level);
    double sum = 0.0;
    const long n = std::lround(t_max / h);
    for (long k = -n; k <= n; ++k) {
      const double t = k * h;
      const double s = std::sinh(t) * 1.5707963267948966;
      const double x = mid + half * std::tanh(s);
      const double w =
          half * 1.5707963267948966 * std::cosh(t) / std::pow(std::cosh(s), 2);
      if (x <= a || x >= b || !std::isfinite(w)) continue;
      sum += w * f(x);
    }
    const double integral = sum * h;
    if (level > 3 && std::abs(integral - previous) < tol * std::abs(integral))
      return integral;
    previous = integral;
  }
  return previous;
}

struct PackingReport {
  std::size_t boundary_violations = 0;
  std::size_t overlap_violations = 0;
  std::size_t outside_phase = 0;  // particles that are neither void nor inclusion
};

/// Exhaustive pairwise check of a packing, independent of the grid the
/// allocator uses.  slack absorbs the difference between the acceptance
/// form (a >= lo + m) and the check form (a - m >= lo).
inline PackingReport check_packing(const crackmc::Microstructure& ms,
                                   double slack = 1e-12) {
  PackingReport report;
  const auto& box = ms.box;
  for (const auto& p : ms.particles) {
    if (p.phase == crackmc::Phase::matrix) {
      ++report.outside_phase;
      continue;
    }
    const double clearance = p.radius * (1.0 + 2.0 * ms.gamma);
    for (int k = 0; k < box.dim; ++k) {
      if (p.center[k] - box.lo[k] < clearance - slack ||
          box.hi[k] - p.center[k] < clearance - slack)
        ++report.boundary_violations;
    }
  }
  for (std::size_t i = 0; i < ms.particles.size(); ++i) {
    for (std::size_t j = i + 1; j < ms.particles.size(); ++j) {
      const auto& a = ms.particles[i];
      const auto& b = ms.particles[j];
      double dist2 = 0.0;
      for (int k = 0; k < box.dim; ++k) {
        const double dk = a.center[k] - b.center[k];
        dist2 += dk * dk;
      }
      bool enlarged = false;
      switch (ms.pair_rule) {
        case crackmc::PairEnlargement::inclusions:
          enlarged = a.phase == crackmc::Phase::inclusion ||
                     b.phase == crackmc::Phase::inclusion;
          break;
        case crackmc::PairEnlargement::all:
          enlarged = true;
          break;
        case crackmc::PairEnlargement::none:
          enlarged = false;
          break;
      }
      double required = a.radius + b.radius;
      if (enlarged) required *= 1.0 + ms.gamma;
      if (std::sqrt(dist2) < required - slack) ++report.overlap_violations;
    }
  }
  return report;
}

}  // namespace testsupport
