// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace coisac {

// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Named random streams. Every consumer of randomness draws from
// derive_seed(master, stream, index) so that results never depend on
// the order in which samples or sweep points are processed.
enum class Stream : std::uint64_t {
  kSampleGen = 1,
  kPerturb = 2,
  kParamInit = 3,
  kShuffle = 4,
  kRandomBeam = 5,
  kCalibration = 6,
  kEvalData = 7,
  kNoisyTwin = 8,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) {
  return splitmix64(splitmix64(master ^ (static_cast<std::uint64_t>(stream) << 56)) + index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index) {
  return Rng(derive_seed(master, stream, index));
}

}  // namespace coisac
