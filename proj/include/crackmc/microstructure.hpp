#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "crackmc/geometry.hpp"
#include "crackmc/random_stream.hpp"

namespace crackmc {

enum class Phase { matrix, void_phase, inclusion };

struct Particle {
  Phase phase = Phase::void_phase;
  std::array<double, 3> center{0.0, 0.0, 0.0};
  double radius = 0.0;
};

struct RadiusRange {
  double r_min = 0.0;
  double r_max = 0.0;
};

/// Which particle pairs get the enlarged separation (1+gamma)(r_i + r_j).
/// `inclusions` enlarges any pair involving an inclusion and leaves
/// void-void pairs at plain tangency distance.
enum class PairEnlargement { inclusions, all, none };

struct AllocationSpec {
  Box box;
  RadiusRange void_radius;
  RadiusRange inclusion_radius;
  double target_voids = 0.0;       // area/volume fraction in [0, 1)
  double target_inclusions = 0.0;  // area/volume fraction in [0, 1)
  double gamma = 0.1;              // separation enlargement factor
  std::size_t max_attempts = 100000;  // per particle
  PairEnlargement pair_rule = PairEnlargement::inclusions;

  void validate() const;  // throws ConfigError
};

struct Microstructure {
  Box box;
  double gamma = 0.1;
  PairEnlargement pair_rule = PairEnlargement::inclusions;
  std::uint64_t seed = 0;       // of the stream that produced the packing
  std::uint64_t stream_id = 0;
  std::vector<Particle> particles;
};

/// Sequential random placement of non-overlapping spherical particles.
///
/// Candidates are drawn uniformly in the box (center coordinates then
/// radius), rejected when they violate boundary clearance 2*gamma*r, the
/// pair separation rule, or would push the phase past its target fraction.
/// Phases alternate (voids first) while both lag their targets; a phase is
/// finished once the remaining gap cannot fit a minimum-radius particle, so
/// the achieved fraction lands within one largest-particle measure below the
/// target and never above it.  Throws PackingSaturated when a particle uses
/// up max_attempts, carrying the fractions reached.
Microstructure allocate(const AllocationSpec& spec, RandomStream& rng);

/// Phase of the unique particle whose closed ball contains x, else matrix.
/// Throws ArgumentError when x lies outside the box.
Phase phase_at(const Microstructure& ms, const std::array<double, 3>& x);

/// (void fraction, inclusion fraction) recomputed from the particle list.
std::pair<double, double> achieved_fractions(const Microstructure& ms);

/// Measure of one particle of radius r in dimension dim (area or volume).
double particle_measure(int dim, double radius);

/// Text serialization: header (dimension, box, gamma, pair rule, stream)
/// followed by one particle per line at fixed 12-decimal precision.
/// read_particles(write_particles(ms)) reproduces the particle data bit for
/// bit at that precision.
void write_particles(std::ostream& os, const Microstructure& ms);
Microstructure read_particles(std::istream& is);

}  // namespace crackmc
