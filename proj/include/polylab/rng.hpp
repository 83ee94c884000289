#pragma once

#include <cmath>
#include <cstdint>

namespace polylab {

// SplitMix64 (Steele/Lea/Flood; Vigna's fixed-increment variant). One 64-bit
// state word, passes BigCrush, and mixing the stream index into the seed gives
// statistically independent substreams, which is what the replica-parallel
// drivers rely on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0,1); never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Portable and bit-reproducible for a given
  // seed, unlike std::normal_distribution.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Derives the seed of substream `index` from a master seed. Used so replicas
// can be generated in any order (or in parallel) with identical results.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  Rng mix(master ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  return mix.next_u64();
}

}  // namespace polylab
