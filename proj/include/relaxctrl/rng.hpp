#ifndef RELAXCTRL_RNG_HPP
#define RELAXCTRL_RNG_HPP

#include <cstdint>

namespace relaxctrl {

/// SplitMix64 generator. Chosen over <random> engines because its output is
/// specified bit-for-bit, so seeded runs reproduce across platforms and
/// standard library implementations. Splitting is done by hashing a stream
/// index into the seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  bool next_bool() { return (next_u64() & 1ULL) != 0; }

  /// Independent child stream; same (seed, stream) always gives the
  /// same sequence.
  static SplitMix64 split(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 mix(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    mix.next_u64();
    return mix;
  }

 private:
  std::uint64_t state_;
};

}  // namespace relaxctrl

#endif
