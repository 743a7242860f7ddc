#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace cpe {

using Engine = std::mt19937_64;

/// Every estimator consumes randomness in blocks of this many items. Block b
/// always draws from the stream derived from (seed, salt, b), so results do
/// not depend on how blocks are distributed over workers.
inline constexpr std::size_t kBlockSize = 1024;

/// Stream identifiers keep estimators that share a user seed statistically
/// independent of each other.
enum class StreamSalt : std::uint64_t {
  alpha_pairs = 0x11,
  self_difference = 0x12,
  shc_paths = 0x21,
  stay_chains = 0x22,
  series_chains = 0x23,
  symmetrized = 0x24,
  charfun = 0x31,
  containment = 0x32,
  resample = 0x33,
  validation = 0x41,
  riesz_suite = 0x51,
  volume_check = 0x61,
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, StreamSalt salt, std::uint64_t index);

Engine make_stream(std::uint64_t seed, StreamSalt salt, std::uint64_t index);

/// Seed offset used when one estimator is run on a second, independent
/// problem (for example the symmetrized side of a comparison).
std::uint64_t sibling_seed(std::uint64_t seed, std::uint64_t which);

inline double uniform01(Engine& eng) { return std::uniform_real_distribution<double>(0.0, 1.0)(eng); }

}  // namespace cpe
