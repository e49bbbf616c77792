#pragma once

#include <cstdint>
#include <random>

namespace tilt {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the stream owned by one (cell, trial) pair.
///
/// The rule is seed' = h(h(h(seed) ^ (cell + 1)) ^ (trial + 1)) with h =
/// splitmix64. Each trial's stream depends only on its own indices, so
/// adding trials or cells never changes the draws of existing ones.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t cell_index,
                                    std::uint64_t trial_index) noexcept {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ (cell_index + 1));
  return splitmix64(s ^ (trial_index + 1));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t cell_index, std::uint64_t trial_index) {
  return Rng(stream_seed(seed, cell_index, trial_index));
}

}  // namespace tilt
