#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedgsca {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a list of tags
/// (client index, round, purpose...). Order of tags matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t s = mix64(base);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags shared by the data, noise and training pipelines.
namespace stream {
inline constexpr std::uint64_t kData = 0xda7a;
inline constexpr std::uint64_t kTest = 0x7e57;
inline constexpr std::uint64_t kNoise = 0x0015e;
inline constexpr std::uint64_t kTrain = 0x7a1;
inline constexpr std::uint64_t kInit = 0x1417;
}  // namespace stream

}  // namespace fedgsca
