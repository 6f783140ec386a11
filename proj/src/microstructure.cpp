#include "crackmc/microstructure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "crackmc/errors.hpp"

namespace crackmc {

namespace {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::matrix:
      return "matrix";
    case Phase::void_phase:
      return "void";
    case Phase::inclusion:
      return "inclusion";
  }
  return "?";
}

const char* pair_rule_name(PairEnlargement rule) {
  switch (rule) {
    case PairEnlargement::inclusions:
      return "inclusions";
    case PairEnlargement::all:
      return "all";
    case PairEnlargement::none:
      return "none";
  }
  return "?";
}

double required_gap(const Particle& a, const Particle& b, double gamma,
                    PairEnlargement rule) {
  const double sum = a.radius + b.radius;
  switch (rule) {
    case PairEnlargement::all:
      return (1.0 + gamma) * sum;
    case PairEnlargement::none:
      return sum;
    case PairEnlargement::inclusions:
      return (a.phase == Phase::inclusion || b.phase == Phase::inclusion)
                 ? (1.0 + gamma) * sum
                 : sum;
  }
  return sum;
}

double sq_distance(const std::array<double, 3>& a,
                   const std::array<double, 3>& b, int dim) {
  double acc = 0.0;
  for (int k = 0; k < dim; ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return acc;
}

// Uniform grid over the box with cells no smaller than the largest possible
// required pair distance, so overlap checks only visit adjacent cells.
class NeighborGrid {
 public:
  NeighborGrid(const Box& box, double cell_target) : box_(box) {
    for (int k = 0; k < box.dim; ++k) {
      n_[k] = std::max<std::size_t>(
          1, static_cast<std::size_t>(box.extent(k) / cell_target));
    }
  }

  void insert(std::size_t particle_index, const std::array<double, 3>& x) {
    cells_[flat_index(cell_of(x))].push_back(particle_index);
  }

  template <typename Visitor>
  void visit_neighbors(const std::array<double, 3>& x, Visitor&& visit) const {
    const auto c = cell_of(x);
    std::array<long, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int k = 0; k < box_.dim; ++k) {
      lo[k] = std::max<long>(0, static_cast<long>(c[k]) - 1);
      hi[k] = std::min<long>(static_cast<long>(n_[k]) - 1,
                             static_cast<long>(c[k]) + 1);
    }
    std::array<std::size_t, 3> cell{0, 0, 0};
    for (long i = lo[0]; i <= hi[0]; ++i) {
      cell[0] = static_cast<std::size_t>(i);
      for (long j = lo[1]; j <= hi[1]; ++j) {
        cell[1] = static_cast<std::size_t>(j);
        for (long k = lo[2]; k <= hi[2]; ++k) {
          cell[2] = static_cast<std::size_t>(k);
          auto it = cells_.find(flat_index(cell));
          if (it == cells_.end()) continue;
          for (std::size_t idx : it->second) visit(idx);
        }
      }
    }
  }

 private:
  std::array<std::size_t, 3> cell_of(const std::array<double, 3>& x) const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (int k = 0; k < box_.dim; ++k) {
      const double t = (x[k] - box_.lo[k]) / box_.extent(k);
      auto i = static_cast<long>(t * static_cast<double>(n_[k]));
      c[k] = static_cast<std::size_t>(
          std::clamp<long>(i, 0, static_cast<long>(n_[k]) - 1));
    }
    return c;
  }

  std::size_t flat_index(const std::array<std::size_t, 3>& c) const {
    return (c[2] * n_[1] + c[1]) * n_[0] + c[0];
  }

  Box box_;
  std::array<std::size_t, 3> n_{1, 1, 1};
  std::unordered_map<std::size_t, std::vector<std::size_t>> cells_;
};

}  // namespace

double particle_measure(int dim, double radius) {
  switch (dim) {
    case 1:
      return 2.0 * radius;
    case 2:
      return std::numbers::pi * radius * radius;
    case 3:
      return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
    default:
      throw ArgumentError("particle_measure: dimension must be 1, 2, or 3");
  }
}

void AllocationSpec::validate() const {
  box.validate();
  if (box.dim < 2)
    throw ConfigError("allocation: box must be 2- or 3-dimensional");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw ConfigError("allocation: gamma must be finite and >= 0");
  if (max_attempts == 0)
    throw ConfigError("allocation: max_attempts must be >= 1");
  if (!(target_voids >= 0.0) || target_voids >= 1.0 ||
      !(target_inclusions >= 0.0) || target_inclusions >= 1.0)
    throw ConfigError("allocation: target fractions must lie in [0, 1)");
  if (target_voids + target_inclusions >= 1.0)
    throw ConfigError("allocation: target fractions must sum below 1");

  double min_extent = box.extent(0);
  for (int k = 1; k < box.dim; ++k)
    min_extent = std::min(min_extent, box.extent(k));

  auto check_range = [&](const RadiusRange& r, double target,
                         const char* which) {
    if (target <= 0.0) return;
    if (!(r.r_min > 0.0) || !(r.r_max >= r.r_min))
      throw ConfigError(std::string("allocation: ") + which +
                        " radius range needs 0 < r_min <= r_max");
    if (2.0 * r.r_min * (1.0 + 2.0 * gamma) > min_extent)
      throw ConfigError(std::string("allocation: smallest ") + which +
                        " particle cannot satisfy boundary clearance");
  };
  check_range(void_radius, target_voids, "void");
  check_range(inclusion_radius, target_inclusions, "inclusion");
}

Microstructure allocate(const AllocationSpec& spec, RandomStream& rng) {
  spec.validate();
  const Box& box = spec.box;
  const double domain = box.measure();

  struct PhaseJob {
    Phase phase;
    RadiusRange radii;
    double target_measure;
    double achieved = 0.0;
    bool active() const {
      // Finished once the remaining gap cannot fit the smallest particle.
      return target_measure - achieved >= particle_measure_cache;
    }
    double particle_measure_cache = 0.0;
  };

  std::array<PhaseJob, 2> jobs{
      PhaseJob{Phase::void_phase, spec.void_radius,
               spec.target_voids * domain},
      PhaseJob{Phase::inclusion, spec.inclusion_radius,
               spec.target_inclusions * domain}};
  for (auto& job : jobs) {
    job.particle_measure_cache =
        job.target_measure > 0.0
            ? particle_measure(box.dim, job.radii.r_min)
            : 1.0;  // inactive from the start when the target is zero
  }

  double r_max_all = 0.0;
  for (const auto& job : jobs)
    if (job.target_measure > 0.0)
      r_max_all = std::max(r_max_all, job.radii.r_max);

  Microstructure ms;
  ms.box = box;
  ms.gamma = spec.gamma;
  ms.pair_rule = spec.pair_rule;
  ms.seed = rng.seed();
  ms.stream_id = rng.stream_id();

  if (r_max_all == 0.0) return ms;  // both targets zero

  NeighborGrid grid(box, 2.0 * (1.0 + spec.gamma) * r_max_all);

  auto try_place = [&](PhaseJob& job) {
    Particle cand;
    cand.phase = job.phase;
    for (std::size_t attempt = 0; attempt < spec.max_attempts; ++attempt) {
      for (int k = 0; k < box.dim; ++k)
        cand.center[k] = box.lo[k] + rng.uniform01() * box.extent(k);
      cand.radius =
          job.radii.r_min + rng.uniform01() * (job.radii.r_max - job.radii.r_min);

      // Surface-to-face clearance of 2*gamma*r on every axis.
      const double margin = cand.radius * (1.0 + 2.0 * spec.gamma);
      bool clear = true;
      for (int k = 0; k < box.dim && clear; ++k)
        clear = cand.center[k] >= box.lo[k] + margin &&
                cand.center[k] <= box.hi[k] - margin;
      if (!clear) continue;

      if (job.achieved + particle_measure(box.dim, cand.radius) >
          job.target_measure)
        continue;  // a particle may never push the phase past its target

      bool separated = true;
      grid.visit_neighbors(cand.center, [&](std::size_t idx) {
        if (!separated) return;
        const Particle& other = ms.particles[idx];
        const double gap =
            required_gap(cand, other, spec.gamma, spec.pair_rule);
        if (sq_distance(cand.center, other.center, box.dim) < gap * gap)
          separated = false;
      });
      if (!separated) continue;

      grid.insert(ms.particles.size(), cand.center);
      ms.particles.push_back(cand);
      job.achieved += particle_measure(box.dim, cand.radius);
      return;
    }
    const auto [voids, inclusions] = achieved_fractions(ms);
    throw PackingSaturated(
        "packing saturated after " + std::to_string(spec.max_attempts) +
            " attempts for one " + phase_name(job.phase) + " particle",
        voids, inclusions);
  };

  while (jobs[0].active() || jobs[1].active()) {
    for (auto& job : jobs)
      if (job.active()) try_place(job);
    if (jobs[0].achieved + jobs[1].achieved >= domain)
      throw StateError("allocation: accumulated particle measure reached the "
                       "domain measure");
  }
  return ms;
}

Phase phase_at(const Microstructure& ms, const std::array<double, 3>& x) {
  if (!ms.box.contains(x))
    throw ArgumentError("phase_at: point lies outside the box");
  for (const Particle& p : ms.particles) {
    if (sq_distance(p.center, x, ms.box.dim) <= p.radius * p.radius)
      return p.phase;
  }
  return Phase::matrix;
}

std::pair<double, double> achieved_fractions(const Microstructure& ms) {
  const double domain = ms.box.measure();
  double voids = 0.0, inclusions = 0.0;
  for (const Particle& p : ms.particles) {
    const double m = particle_measure(ms.box.dim, p.radius);
    if (p.phase == Phase::void_phase)
      voids += m;
    else if (p.phase == Phase::inclusion)
      inclusions += m;
  }
  return {voids / domain, inclusions / domain};
}

namespace {

void write_fixed(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12f", v);
  os << buf;
}

[[noreturn]] void malformed(const std::string& what) {
  throw ConfigError("microstructure file: " + what);
}

}  // namespace

void write_particles(std::ostream& os, const Microstructure& ms) {
  os << "crackmc-microstructure 1\n";
  os << "dim " << ms.box.dim << "\n";
  os << "box";
  for (double v : ms.box.lo) {
    os << ' ';
    write_fixed(os, v);
  }
  for (double v : ms.box.hi) {
    os << ' ';
    write_fixed(os, v);
  }
  os << "\n";
  os << "gamma ";
  write_fixed(os, ms.gamma);
  os << "\n";
  os << "pair_rule " << pair_rule_name(ms.pair_rule) << "\n";
  os << "stream " << ms.seed << ' ' << ms.stream_id << "\n";
  os << "particles " << ms.particles.size() << "\n";
  for (const Particle& p : ms.particles) {
    os << phase_name(p.phase);
    for (double v : p.center) {
      os << ' ';
      write_fixed(os, v);
    }
    os << ' ';
    write_fixed(os, p.radius);
    os << "\n";
  }
}

Microstructure read_particles(std::istream& is) {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "crackmc-microstructure")
    malformed("missing header");
  if (version != 1) malformed("unsupported version " + std::to_string(version));

  Microstructure ms;
  if (!(is >> tag >> ms.box.dim) || tag != "dim") malformed("expected 'dim'");
  if (!(is >> tag) || tag != "box") malformed("expected 'box'");
  for (double& v : ms.box.lo)
    if (!(is >> v)) malformed("truncated box bounds");
  for (double& v : ms.box.hi)
    if (!(is >> v)) malformed("truncated box bounds");
  if (!(is >> tag >> ms.gamma) || tag != "gamma") malformed("expected 'gamma'");
  std::string rule;
  if (!(is >> tag >> rule) || tag != "pair_rule")
    malformed("expected 'pair_rule'");
  if (rule == "inclusions")
    ms.pair_rule = PairEnlargement::inclusions;
  else if (rule == "all")
    ms.pair_rule = PairEnlargement::all;
  else if (rule == "none")
    ms.pair_rule = PairEnlargement::none;
  else
    malformed("unknown pair rule '" + rule + "'");
  if (!(is >> tag >> ms.seed >> ms.stream_id) || tag != "stream")
    malformed("expected 'stream'");
  std::size_t count = 0;
  if (!(is >> tag >> count) || tag != "particles")
    malformed("expected 'particles'");
  ms.box.validate();

  ms.particles.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string phase;
    Particle p;
    if (!(is >> phase >> p.center[0] >> p.center[1] >> p.center[2] >>
          p.radius))
      malformed("truncated particle record " + std::to_string(i));
    if (phase == "void")
      p.phase = Phase::void_phase;
    else if (phase == "inclusion")
      p.phase = Phase::inclusion;
    else
      malformed("unknown phase '" + phase + "'");
    if (!(p.radius > 0.0)) malformed("non-positive radius");
    ms.particles.push_back(p);
  }
  return ms;
}

}  // namespace crackmc
