#include "lshbeam/ref_kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace lshbeam::ref {

MatU32 hash_matrix(const MatF& M, const PermutationSet& perms,
                   const WtaParams& params) {
  MatU32 codes(M.rows(), params.W);
  for (size_t i = 0; i < M.rows(); ++i) {
    const auto indices = wta_hash_vector(M.row(i), perms);
    const auto bands = pack_bands(indices, params);
    for (int w = 0; w < params.W; ++w) codes(i, w) = bands[w];
  }
  return codes;
}

HitMatrix lookup_hits(const MatU32& vocab_codes, const MatU32& query_codes) {
  if (vocab_codes.cols() != query_codes.cols())
    throw std::invalid_argument("ref::lookup_hits: band count mismatch");
  const size_t vocab = vocab_codes.rows();
  const size_t B = query_codes.rows();
  const size_t W = vocab_codes.cols();
  HitMatrix L(B, vocab);
  for (size_t i = 0; i < B; ++i) {
    for (size_t j = 0; j < vocab; ++j) {
      int32_t hits = 0;
      for (size_t w = 0; w < W; ++w) {
        if (query_codes(i, w) == vocab_codes(j, w)) ++hits;
      }
      L(i, j) = hits;
    }
  }
  return L;
}

std::vector<uint32_t> select_candidates(const HitMatrix& L, int threshold) {
  std::vector<uint32_t> out;
  for (size_t j = 0; j < L.cols(); ++j) {
    for (size_t i = 0; i < L.rows(); ++i) {
      if (L(i, j) >= threshold) {
        out.push_back(static_cast<uint32_t>(j));
        break;
      }
    }
  }
  return out;
}

MatF compute_logits(const MatF& H, const MatF& E_sub) {
  if (H.cols() != E_sub.cols())
    throw std::invalid_argument("ref::compute_logits: dimension mismatch");
  MatF out(H.rows(), E_sub.rows());
  for (size_t i = 0; i < H.rows(); ++i) {
    for (size_t r = 0; r < E_sub.rows(); ++r) {
      float acc = 0.0f;
      for (size_t c = 0; c < H.cols(); ++c) acc += H(i, c) * E_sub(r, c);
      out(i, r) = acc;
    }
  }
  return out;
}

MatF softmax_rows(const MatF& logits) {
  MatF out(logits.rows(), logits.cols());
  for (size_t i = 0; i < logits.rows(); ++i) {
    float mx = -INFINITY;
    for (size_t j = 0; j < logits.cols(); ++j) mx = std::max(mx, logits(i, j));
    if (std::isinf(mx) && mx < 0)
      throw std::invalid_argument("ref::softmax_rows: empty candidate row");
    double denom = 0.0;
    for (size_t j = 0; j < logits.cols(); ++j)
      denom += std::exp(static_cast<double>(logits(i, j)) - mx);
    for (size_t j = 0; j < logits.cols(); ++j)
      out(i, j) = static_cast<float>(
          std::exp(static_cast<double>(logits(i, j)) - mx) / denom);
  }
  return out;
}

}  // namespace lshbeam::ref
