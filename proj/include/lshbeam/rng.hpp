#pragma once

#include <cmath>
#include <cstdint>

namespace lshbeam {

// SplitMix64 (Steele/Lea/Vigna). Chosen because the algorithm is fully
// specified by two lines of integer arithmetic, so fixtures generated here
// can be reproduced in any language from the documented constants alone.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) by rejection below the largest multiple
  // of bound.
  uint64_t bounded(uint64_t bound) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

  // 53-bit uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Box-Muller cosine branch. Consumes exactly two draws per call; the sine
  // companion is discarded so the stream layout stays one-call-two-draws.
  double gaussian() {
    const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

// Derives an independent stream seed from (seed, stream). Used wherever two
// consumers must not share draw positions (per-band cuckoo parameters, the
// index seed derived from a model seed, ...).
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  SplitMix64 g(seed ^ (0xBF58476D1CE4E5B9ull * (stream + 1)));
  return g.next();
}

}  // namespace lshbeam
