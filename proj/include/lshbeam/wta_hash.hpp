#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lshbeam/matrix.hpp"

namespace lshbeam {

// Band codes are strictly below 2^30, so this value can never be produced by
// pack_bands. The cuckoo tables use it to mark empty slots.
inline constexpr uint32_t kEmptyCode = 0x7FFFFFFFu;

// Winner-take-all hash family {K, u, W}: P = u*W ordinal hashes, grouped into
// W bands of u codes each. Construction rejects parameter sets whose band
// codes would not fit in 30 bits.
struct WtaParams {
  int K;          // entries inspected per permutation window
  int u;          // hash codes per band
  int W;          // bands
  uint64_t seed;  // permutation seed

  WtaParams(int K, int u, int W, uint64_t seed);

  int num_hashes() const { return u * W; }
  int bits_per_index() const { return bits_for(K); }

  static int bits_for(int K);  // ceil(log2 K)
};

// First-K prefixes of P seeded shuffles of [0, d). Only the prefix is kept:
// the hash below never reads past position K-1 of a permutation.
class PermutationSet {
 public:
  // Row p is the first K entries of a Fisher-Yates shuffle of [0, d); all
  // rows are drawn in order from a single SplitMix64 stream seeded with
  // `seed`.
  static PermutationSet generate(int d, int num_perms, int K, uint64_t seed);

  // Explicit rows (tests, externally chosen permutations). `prefixes` is
  // row-major num_perms x K.
  PermutationSet(int d, int K, std::vector<uint32_t> prefixes);

  int dim() const { return d_; }
  int window() const { return K_; }
  int num_perms() const { return static_cast<int>(prefixes_.size() / K_); }
  std::span<const uint32_t> row(int p) const {
    return {prefixes_.data() + static_cast<size_t>(p) * K_,
            static_cast<size_t>(K_)};
  }

  bool operator==(const PermutationSet&) const = default;

 private:
  PermutationSet() = default;
  int d_ = 0;
  int K_ = 0;
  std::vector<uint32_t> prefixes_;  // num_perms x K
};

PermutationSet generate_permutations(int d, const WtaParams& params);

// Ordinal hash of one vector: indices[p] = argmax over the first K permuted
// entries, reading v[row_p[k]], ties to the smallest k. Throws on length
// mismatch or NaN input.
std::vector<uint32_t> wta_hash_vector(std::span<const float> v,
                                      const PermutationSet& perms);

// Packs P = u*W hash indices into W band codes, u consecutive indices per
// band, the first index in the lowest bits.
std::vector<uint32_t> pack_bands(std::span<const uint32_t> indices,
                                 const WtaParams& params);

// Inverse of pack_bands for one band code.
std::vector<uint32_t> unpack_band(uint32_t code, const WtaParams& params);

// Row i of the result is pack_bands(wta_hash_vector(M[i])). Rows are
// independent and processed in parallel.
MatU32 hash_matrix(const MatF& M, const PermutationSet& perms,
                   const WtaParams& params);

}  // namespace lshbeam
