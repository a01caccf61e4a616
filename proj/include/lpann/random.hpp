#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lpann {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for a component identified by a sequence of tags.
/// Every random stream in the project is derived this way from the single user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t t : tags) s = splitmix64(s ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

// Component tags.
namespace seed_tag {
inline constexpr std::uint64_t level_copy = 1;
inline constexpr std::uint64_t coarse = 2;
inline constexpr std::uint64_t l2 = 3;
inline constexpr std::uint64_t cluster = 4;
inline constexpr std::uint64_t trial = 5;
inline constexpr std::uint64_t dataset = 6;
inline constexpr std::uint64_t build = 7;
inline constexpr std::uint64_t radius = 8;
}  // namespace seed_tag

}  // namespace lpann
