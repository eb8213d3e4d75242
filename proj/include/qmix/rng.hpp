#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qmix {

// splitmix64 finalizer. Used to turn structured keys (base seed, scenario,
// replication index, stream role) into well-spread stream seeds so that
// every unit of work owns an independent, reproducible generator no matter
// how work is scheduled across threads.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive combination of a key sequence into one stream seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x853c49e6748fea9bULL;
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return h;
}

inline std::mt19937_64 make_engine(std::initializer_list<std::uint64_t> keys) {
  return std::mt19937_64(derive_seed(keys));
}

// Stream roles keep sibling streams (data generation, estimator bootstraps,
// sample splits) from colliding even when they share the same base keys.
namespace stream {
inline constexpr std::uint64_t dataset = 101;
inline constexpr std::uint64_t qgc_bootstrap = 102;
inline constexpr std::uint64_t wqs_split = 103;
inline constexpr std::uint64_t wqs_bootstrap = 104;
}  // namespace stream

}  // namespace qmix
