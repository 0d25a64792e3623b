#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace underdet {

// SplitMix64 stream generator. Every random choice in the library flows
// through this generator, so a run is fully determined by its top-level
// seed. The mixing constants are the ones from the reference SplitMix64
// and are part of the output contract: a report is reproducible from the
// seed recorded in it, on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // integer in [0, n); modulo bias is irrelevant at the n used here
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller. Consumes exactly two uniforms per call and keeps no cached
  // spare, so the draw sequence is well defined.
  double gaussian(double mean, double stddev) {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  // Derive the seed of an independent sub-stream: the SplitMix64 finalizer
  // applied to base + (index + 1) * golden gamma. Used for ensemble member
  // seeds and for the per-experiment data/training/scoring streams.
  static std::uint64_t split(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + (index + 1) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace underdet
