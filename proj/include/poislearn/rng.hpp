#pragma once
// Deterministic random streams. All draws go through explicit integer-based
// mappings so results are identical across platforms and standard libraries.

#include <cstdint>
#include <random>
#include <vector>

namespace poislearn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent substream ids derived from one user-facing seed.
enum class Stream : std::uint64_t {
  Weights = 1,
  TrainIc = 2,
  GtIc = 3,
  Split = 4,
  Batches = 5,
};

// Sub-seed such that Rng(derive_seed(s, stream)) == Rng(s, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
  return splitmix64(seed) ^ static_cast<std::uint64_t>(stream);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, Stream stream)
      : g_(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream))) {}

  std::uint64_t next() { return g_(); }

  // Uniform draw in [lo, hi) using the top 53 bits.
  double uniform(double lo, double hi) {
    double u = static_cast<double>(g_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = g_();
    while (v >= limit) v = g_();
    return v % n;
  }

  // Standard normal via Box-Muller on explicit uniforms.
  double normal() {
    double u1 = uniform(0.0, 1.0);
    while (u1 <= 0.0) u1 = uniform(0.0, 1.0);
    double u2 = uniform(0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Fisher-Yates with our own index draws (std::shuffle is not portable).
  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::mt19937_64 g_;
};

}  // namespace poislearn
