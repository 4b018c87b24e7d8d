#include "lshbeam/eval_oracle.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "lshbeam/beam_decoder.hpp"

namespace lshbeam {

TopB exact_topb_logits(const MatF& logits, int b_out) {
  const int64_t rows = static_cast<int64_t>(logits.rows());
  const size_t n = logits.cols();
  if (b_out < 0 || static_cast<size_t>(b_out) > n)
    throw std::invalid_argument("exact_topb: b_out exceeds column count");

  TopB out;
  out.ids = MatU32(rows, b_out);
  out.values = MatF(rows, b_out);

#pragma omp parallel
  {
    std::vector<uint32_t> order(n);
#pragma omp for schedule(static)
    for (int64_t i = 0; i < rows; ++i) {
      const float* row = logits.row(i).data();
      std::iota(order.begin(), order.end(), 0u);
      std::partial_sort(order.begin(), order.begin() + b_out, order.end(),
                        [row](uint32_t a, uint32_t b) {
                          if (row[a] != row[b]) return row[a] > row[b];
                          return a < b;
                        });
      for (int k = 0; k < b_out; ++k) {
        out.ids(i, k) = order[k];
        out.values(i, k) = row[order[k]];
      }
    }
  }
  return out;
}

TopB exact_topb(const MatF& H, const MatF& E, int b_out) {
  return exact_topb_logits(compute_logits(H, E), b_out);
}

RecallResult recall_at_b(const CandidateSet& candidates,
                         const MatU32& exact_ids) {
  RecallResult r;
  const size_t rows = exact_ids.rows();
  const size_t b = exact_ids.cols();
  r.per_row.resize(rows);
  double total = 0.0;
  for (size_t i = 0; i < rows; ++i) {
    size_t hit = 0;
    for (size_t k = 0; k < b; ++k) {
      if (candidates.contains(exact_ids(i, k))) ++hit;
    }
    r.per_row[i] = b == 0 ? 0.0 : static_cast<double>(hit) / b;
    total += r.per_row[i];
  }
  r.mean = rows == 0 ? 0.0 : total / rows;
  return r;
}

std::vector<std::vector<uint32_t>> per_beam_candidates(const HitMatrix& L,
                                                       int threshold) {
  if (threshold < 0)
    throw std::invalid_argument("per_beam_candidates: negative threshold");
  const size_t B = L.rows();
  const size_t vocab = L.cols();
  std::vector<std::vector<uint32_t>> lists(B);
  for (size_t i = 0; i < B; ++i) {
    for (size_t j = 0; j < vocab; ++j) {
      if (L(i, j) >= threshold) lists[i].push_back(static_cast<uint32_t>(j));
    }
  }
  return lists;
}

}  // namespace lshbeam
