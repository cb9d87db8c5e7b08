#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace t4c {

// std::mt19937_64 output is fixed by the standard; the distributions in
// <random> are not, so the helpers below are used wherever outputs must be
// reproducible across standard libraries.

/// Seed for a named sub-stream of `seed` (splitmix64 over an FNV-1a hash of the name).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// Uniform integer in [0, n). n must be > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng);

}  // namespace t4c
