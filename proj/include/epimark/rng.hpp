#pragma once

// Platform-stable seeded randomness. The standard distributions are
// implementation-defined, so sampling uses these helpers on top of
// std::mt19937_64 (whose output sequence is fixed by the standard).

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace epimark {

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

/// Derives a sub-seed from a base seed and a label (FNV-1a over the label).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng);

/// Fisher-Yates shuffle driven by uniform_below.
template <class T>
void stable_shuffle(std::span<T> values, std::mt19937_64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform_below(rng, i));
    using std::swap;
    swap(values[i - 1], values[j]);
  }
}

}  // namespace epimark
