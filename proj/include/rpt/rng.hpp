#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rpt {

// splitmix64; used to derive independent named streams from one run seed so
// that consuming one stream (e.g. classifier minibatches) cannot shift another
// (e.g. env resets). Distribution helpers avoid std::*_distribution on purpose:
// engines are specified by the standard, distributions are not, and metrics
// files must be reproducible byte for byte.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ (stream * 0x9e3779b97f4a7c15ULL)) + index);
}

// Registry of derived-stream ids. Every consumer of randomness draws from its
// own stream so adding draws in one place never perturbs another.
namespace streams {
constexpr std::uint64_t policy_act = 1;        // exploration draws inside learners
constexpr std::uint64_t actor_init = 2;        // actor network init
constexpr std::uint64_t critic_init = 3;       // critic network init
constexpr std::uint64_t classifier_init = 4;   // risk classifier init
constexpr std::uint64_t classifier_batch = 5;  // positive/negative minibatch draws
constexpr std::uint64_t policy_batch = 6;      // replay minibatch draws
constexpr std::uint64_t env_episode = 7;       // per-episode environment seeds
constexpr std::uint64_t eval = 8;              // evaluation episodes
}  // namespace streams

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in (0,1), never exactly 0 or 1; safe under log().
inline double uniform01_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double normal01(std::mt19937_64& rng) {
  const double u1 = uniform01_open(rng);
  const double u2 = uniform01_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Modulo bias is < 2^-57 for any n that fits desk-scale tables.
inline int uniform_int(std::mt19937_64& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

}  // namespace rpt
