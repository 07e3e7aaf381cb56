#pragma once

#include <cstdint>
#include <random>

namespace ehrgen {

using Rng = std::mt19937_64;

// Seed splitting used everywhere a stage needs independent streams: the
// SplitMix64 finalizer applied to base, then mixed with stream and index.
// derive_seed(s, a, i) is a pure function, so per-patient work can be
// scheduled in any order without changing results.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(base, stream, index));
}

// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace ehrgen
