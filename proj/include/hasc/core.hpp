#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace hasc {

using Real = double;
using Index = std::int64_t;

// Row-major so that per-user / per-item rows are contiguous.
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Derives an independent child seed; used wherever a sub-task needs its own
// stream (per-repeat evaluation, per-vertex walks, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform integer in [0, n). std::uniform_int_distribution is not pinned by
// the standard, so the draw is spelled out to keep streams portable.
inline Index uniform_index(Rng& rng, Index n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<Index>(x % bound);
}

inline Real uniform_real(Rng& rng) {
  return static_cast<Real>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; same portability reasoning as uniform_index.
inline Real standard_normal(Rng& rng) {
  Real u1 = uniform_real(rng);
  while (u1 <= 0.0) u1 = uniform_real(rng);
  const Real u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<Index>(last - first);
  for (Index i = n - 1; i > 0; --i) {
    std::swap(first[i], first[uniform_index(rng, i + 1)]);
  }
}

}  // namespace hasc
