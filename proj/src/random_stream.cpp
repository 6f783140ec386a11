#include "crackmc/random_stream.hpp"

namespace crackmc {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;  // 2^64 / golden ratio

// Finalizer of the splitmix64 generator: bijective, avalanching mix.
std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream_id) noexcept {
  // Two mixing rounds so that nearby (seed, stream) pairs land far apart.
  return mix64(mix64(seed + kGamma) ^ mix64(stream_id * kGamma + 1));
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
    : seed_(seed), stream_id_(stream_id), key_(derive_key(seed, stream_id)) {}

std::uint64_t RandomStream::peek(std::uint64_t index) const noexcept {
  return mix64(key_ + index * kGamma);
}

std::uint64_t RandomStream::next_u64() noexcept {
  return mix64(key_ + (counter_++) * kGamma);
}

double RandomStream::uniform01() noexcept {
  // 53 high bits, the exact double grid on [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform01();
}

double RandomStream::symmetric_unit() noexcept {
  return 2.0 * uniform01() - 1.0;
}

RandomStream RandomStream::substream(std::uint64_t tag) const noexcept {
  RandomStream child(seed_, stream_id_);
  child.key_ = mix64(key_ ^ mix64(tag * kGamma + 0x632BE59BD9B4E019ull));
  return child;
}

}  // namespace crackmc
