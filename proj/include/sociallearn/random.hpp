#pragma once

#include <cstdint>
#include <random>

namespace sociallearn {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to turn (root seed, stream index) pairs into
/// decorrelated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` under `root`. Trial t of an experiment uses
/// derive_seed(root, t); sub-streams inside a trial derive again from that.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(root) + index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace sociallearn
