#pragma once

#include <cstdint>

namespace crackmc {

/// Counter-based random stream.  Every draw is a pure function of
/// (seed, stream_id, draw_index), so streams replay exactly, split across
/// workers without shared state, and distinct stream ids never interleave.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t draw_index() const noexcept { return counter_; }

  /// Next raw 64-bit word; advances the draw counter.
  std::uint64_t next_u64() noexcept;

  /// Uniform draw in [0, 1).
  double uniform01() noexcept;

  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi) noexcept;

  /// Uniform draw in [-1, 1].
  double symmetric_unit() noexcept;

  /// Word the stream would produce at `index`, without advancing.
  std::uint64_t peek(std::uint64_t index) const noexcept;

  /// Derived stream, decorrelated from this one for any distinct tag.
  RandomStream substream(std::uint64_t tag) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;  // mixed (seed, stream_id) origin of the counter walk
  std::uint64_t counter_ = 0;
};

}  // namespace crackmc
