#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace psn {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, purpose, index). Purpose tags keep e.g. the
// mask stream of layer 0 from colliding with the weight stream of layer 0.
enum class Stream : std::uint64_t {
  kMask = 1,
  kWeights = 2,
  kShuffle = 3,
  kLognormal = 4,
  kSynthetic = 5,
  kSplit = 6,
};

inline Rng make_rng(std::uint64_t seed, Stream purpose, std::uint64_t index = 0) {
  const std::uint64_t s = mix64(mix64(seed) ^ mix64(static_cast<std::uint64_t>(purpose) << 32 | index));
  return Rng{s};
}

// Unbiased integer in [0, bound) by rejection; independent of the standard
// library's distribution implementations.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = kMax - kMax % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace psn
