#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sre {

/// 64-bit FNV-1a. Stable across platforms and builds, unlike std::hash.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for one unit of work, e.g. derive_seed(run_seed, item_id, sample_index).
std::uint64_t derive_seed(std::uint64_t base, std::string_view key, std::uint64_t index = 0);

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double unit_uniform(Rng& rng);

/// Uniform integer in [0, bound). bound must be > 0.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

}  // namespace sre
