#pragma once

#include <cstdint>
#include <random>

namespace trainopt::detail {

// Independent generator per (seed, stream) pair.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  return std::mt19937_64(seq);
}

}  // namespace trainopt::detail
