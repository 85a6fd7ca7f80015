#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace vpt {

// SplitMix64 finalizer over (seed, salt); derives independent streams from a
// single run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Row indices split into batches after a shuffle drawn from `rng`; the last
// partial batch is kept.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t count, std::size_t batch_size,
                                                       std::mt19937_64& rng);
std::vector<std::vector<std::size_t>> sequential_batches(std::size_t count, std::size_t batch_size);

}  // namespace vpt
