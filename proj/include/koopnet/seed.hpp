#pragma once

#include <cstdint>

namespace koopnet {

/// Counter-based split of a master seed into independent sub-seeds
/// (SplitMix64 finalizer over master + stream * golden gamma).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Named streams so every artifact can log which sub-seed it consumed.
namespace seed_stream {
inline constexpr std::uint64_t kTrainData = 1;
inline constexpr std::uint64_t kTestData = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kScalingBase = 100;  // + target layer index
inline constexpr std::uint64_t kTrajectories = 200;
}  // namespace seed_stream

}  // namespace koopnet
