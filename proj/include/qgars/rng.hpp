#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qgars {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed from a master seed and a path of labels, e.g.
/// (run id, stream purpose, epoch, node).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Uniform double in [0, 1) from a hashed counter; used where a draw must not
/// depend on how many other draws were made (node failures, for instance).
inline double hashed_uniform(std::uint64_t master,
                             std::initializer_list<std::uint64_t> path) {
  return static_cast<double>(derive_seed(master, path) >> 11) * 0x1.0p-53;
}

// Stream purposes.
enum Stream : std::uint64_t {
  kWorkload = 1,
  kDemand = 2,
  kPrediction = 3,
  kFailure = 4,
  kAnneal = 5,
  kArrival = 6,
  kRelease = 7,
  kEpisode = 8,
};

}  // namespace qgars
