#include "lshbeam/wta_hash.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lshbeam/rng.hpp"

namespace lshbeam {

int WtaParams::bits_for(int K) {
  int bits = 0;
  while ((1 << bits) < K) ++bits;
  return bits;
}

WtaParams::WtaParams(int K, int u, int W, uint64_t seed)
    : K(K), u(u), W(W), seed(seed) {
  if (K < 2) throw std::invalid_argument("WtaParams: K must be >= 2");
  if (u < 1) throw std::invalid_argument("WtaParams: u must be >= 1");
  if (W < 1) throw std::invalid_argument("WtaParams: W must be >= 1");
  const int band_bits = u * bits_for(K);
  if (band_bits >= 31) {
    throw std::invalid_argument(
        "WtaParams: packing overflow, u*ceil(log2(K)) = " +
        std::to_string(band_bits) + " bits does not fit a 31-bit band code");
  }
}

PermutationSet PermutationSet::generate(int d, int num_perms, int K,
                                        uint64_t seed) {
  if (K < 1) throw std::invalid_argument("PermutationSet: K must be >= 1");
  if (d < K) {
    throw std::invalid_argument("PermutationSet: dimension " +
                                std::to_string(d) + " smaller than window " +
                                std::to_string(K));
  }
  PermutationSet out;
  out.d_ = d;
  out.K_ = K;
  out.prefixes_.resize(static_cast<size_t>(num_perms) * K);

  SplitMix64 g(seed);
  std::vector<uint32_t> scratch(d);
  for (int p = 0; p < num_perms; ++p) {
    std::iota(scratch.begin(), scratch.end(), 0u);
    for (int k = 0; k < K; ++k) {
      const uint64_t j = k + g.bounded(static_cast<uint64_t>(d - k));
      std::swap(scratch[k], scratch[j]);
      out.prefixes_[static_cast<size_t>(p) * K + k] = scratch[k];
    }
  }
  return out;
}

PermutationSet::PermutationSet(int d, int K, std::vector<uint32_t> prefixes)
    : d_(d), K_(K), prefixes_(std::move(prefixes)) {
  if (K < 1 || d < K || prefixes_.size() % K != 0)
    throw std::invalid_argument("PermutationSet: malformed prefix rows");
  for (uint32_t idx : prefixes_) {
    if (idx >= static_cast<uint32_t>(d))
      throw std::invalid_argument("PermutationSet: index out of range");
  }
}

PermutationSet generate_permutations(int d, const WtaParams& params) {
  return PermutationSet::generate(d, params.num_hashes(), params.K,
                                  params.seed);
}

namespace {

// Shared scalar core; callers guarantee v.size() == perms.dim() and no NaN.
inline void hash_into(std::span<const float> v, const PermutationSet& perms,
                      uint32_t* out) {
  const int P = perms.num_perms();
  const int K = perms.window();
  for (int p = 0; p < P; ++p) {
    const uint32_t* row = perms.row(p).data();
    uint32_t best = 0;
    float best_val = v[row[0]];
    for (int k = 1; k < K; ++k) {
      const float val = v[row[k]];
      if (val > best_val) {
        best_val = val;
        best = static_cast<uint32_t>(k);
      }
    }
    out[p] = best;
  }
}

inline void check_vector(std::span<const float> v, const PermutationSet& perms) {
  if (static_cast<int>(v.size()) != perms.dim())
    throw std::invalid_argument("wta_hash_vector: vector length " +
                                std::to_string(v.size()) +
                                " != permutation dimension " +
                                std::to_string(perms.dim()));
  for (float x : v) {
    if (std::isnan(x))
      throw std::invalid_argument("wta_hash_vector: NaN input");
  }
}

inline void pack_into(const uint32_t* indices, const WtaParams& params,
                      uint32_t* out) {
  const int bits = params.bits_per_index();
  for (int w = 0; w < params.W; ++w) {
    uint32_t code = 0;
    for (int i = 0; i < params.u; ++i) {
      code |= indices[w * params.u + i] << (i * bits);
    }
    out[w] = code;
  }
}

}  // namespace

std::vector<uint32_t> wta_hash_vector(std::span<const float> v,
                                      const PermutationSet& perms) {
  check_vector(v, perms);
  std::vector<uint32_t> out(perms.num_perms());
  hash_into(v, perms, out.data());
  return out;
}

std::vector<uint32_t> pack_bands(std::span<const uint32_t> indices,
                                 const WtaParams& params) {
  if (static_cast<int>(indices.size()) != params.num_hashes())
    throw std::invalid_argument("pack_bands: expected u*W indices");
  std::vector<uint32_t> out(params.W);
  pack_into(indices.data(), params, out.data());
  return out;
}

std::vector<uint32_t> unpack_band(uint32_t code, const WtaParams& params) {
  const int bits = params.bits_per_index();
  const uint32_t mask = (1u << bits) - 1;
  std::vector<uint32_t> out(params.u);
  for (int i = 0; i < params.u; ++i) {
    out[i] = (code >> (i * bits)) & mask;
  }
  return out;
}

MatU32 hash_matrix(const MatF& M, const PermutationSet& perms,
                   const WtaParams& params) {
  if (!M.empty() && static_cast<int>(M.cols()) != perms.dim())
    throw std::invalid_argument("hash_matrix: column count mismatch");
  const int64_t n = static_cast<int64_t>(M.rows());
  MatU32 codes(n, params.W);

  // Exceptions must not cross the parallel region; record and rethrow after.
  bool nan_seen = false;
#pragma omp parallel reduction(|| : nan_seen)
  {
    std::vector<uint32_t> indices(params.num_hashes());
#pragma omp for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      for (float x : M.row(i)) {
        if (std::isnan(x)) nan_seen = true;
      }
      if (nan_seen) continue;
      hash_into(M.row(i), perms, indices.data());
      pack_into(indices.data(), params, codes.row(i).data());
    }
  }
  if (nan_seen) throw std::invalid_argument("hash_matrix: NaN input");
  return codes;
}

}  // namespace lshbeam
