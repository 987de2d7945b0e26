#pragma once

#include <cstdint>
#include <random>

namespace rally {

using Rng = std::mt19937_64;

/// Independent generator for one stream of a seeded experiment.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Seed for the stream-th sub-run of an experiment seeded with master
/// (splitmix64 finalizer over both values).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(master ^ mix(stream));
}

}  // namespace rally
