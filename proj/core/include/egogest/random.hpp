#pragma once

#include <cstdint>
#include <random>

namespace egogest {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; turns (master seed, stream index) into an
/// independent-looking child seed so parallel work stays reproducible.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace egogest
