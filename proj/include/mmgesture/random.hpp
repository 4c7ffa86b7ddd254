#pragma once

#include <cstdint>
#include <random>

namespace mmgesture {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

// Seed for sub-stream `stream` of `base`. Distinct streams give unrelated seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

double uniform(Rng& rng, double lo, double hi);

}  // namespace mmgesture
