#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace isqr {

// Stateless counter-based generator: every draw is a pure function of
// (key, counters...), so any parallel schedule reproduces the same numbers.
namespace rng {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t hash(std::uint64_t key, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = mix64(key ^ 0x5851f42d4c957f2dULL);
  for (std::uint64_t c : counters) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

// Uniform on the open interval (0, 1).
inline double uniform(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential(std::uint64_t bits) { return -std::log(uniform(bits)); }

// Draw purposes keep streams for different quantities disjoint.
enum Purpose : std::uint64_t {
  kCovariate = 1,
  kEventTime = 2,
  kCensorTime = 3,
  kMultiplier = 4,
  kReplicateSeed = 5,
};

}  // namespace rng
}  // namespace isqr
