#pragma once

#include <cstdint>
#include <initializer_list>

namespace wnum {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent 64-bit seed from a base seed and a list of stream
// coordinates (e.g. {stream_tag, episode_index}).
inline constexpr std::uint64_t derive_seed(std::uint64_t base,
                                           std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream tags for derive_seed. Training and evaluation instances come from
// different streams so they never share instance seeds.
enum class SeedStream : std::uint64_t {
  kTrainInstances = 1,
  kEvalInstances = 2,
  kController = 3,
  kPlanner = 4,
  kRefreshOffsets = 5,
  kMinibatch = 6,
  kInit = 7,
};

inline constexpr std::uint64_t derive_seed(std::uint64_t base, SeedStream stream,
                                           std::uint64_t index) {
  return derive_seed(base, {static_cast<std::uint64_t>(stream), index});
}

}  // namespace wnum
