#pragma once

// Deterministic randomness. The generator is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; conversions to floats and
// categorical draws are done here (not via <random> distributions, whose
// algorithms are implementation-defined) so runs are bit-reproducible.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace torus_equidist {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for stream `stream` of a run seeded with `seed`. Partitioning the
/// seed space this way keeps results independent of worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x5851f42d4c957f2dULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

/// Uniform double in [0,1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Categorical sampler over a probability vector.
class Categorical {
 public:
  Categorical() = default;
  explicit Categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("Categorical: empty probability vector");
    cumulative_.resize(probs.size());
    double acc = 0.0;
    std::size_t last_positive = probs.size();
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] < 0.0) throw std::invalid_argument("Categorical: negative probability");
      acc += probs[i];
      cumulative_[i] = acc;
      if (probs[i] > 0.0) last_positive = i;
    }
    if (last_positive == probs.size()) throw std::invalid_argument("Categorical: all probabilities zero");
    for (std::size_t i = 0; i < probs.size(); ++i) cumulative_[i] /= acc;
    for (std::size_t i = last_positive; i < probs.size(); ++i) cumulative_[i] = 1.0;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng);
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (u < cumulative_[mid]) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

  std::size_t size() const { return cumulative_.size(); }

 private:
  std::vector<double> cumulative_;
};

}  // namespace torus_equidist
