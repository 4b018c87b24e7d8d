#pragma once

#include <cstdint>
#include <vector>

#include "lshbeam/band_index.hpp"
#include "lshbeam/candidate_selector.hpp"
#include "lshbeam/matrix.hpp"

namespace lshbeam {

// Exact per-row top-b_out selections, descending value, ties broken by the
// smaller word id.
struct TopB {
  MatU32 ids;     // rows x b_out
  MatF values;    // matching logits
};

// Brute-force references used to score the fast path.
TopB exact_topb_logits(const MatF& logits, int b_out);
TopB exact_topb(const MatF& H, const MatF& E, int b_out);

struct RecallResult {
  std::vector<double> per_row;
  double mean = 0.0;
};

// recall_i = |exact top-b of row i that are in the candidate set| / b.
RecallResult recall_at_b(const CandidateSet& candidates, const MatU32& exact_ids);

// Per-beam candidate lists {j : L[i,j] >= t}, the non-shared baseline shape.
std::vector<std::vector<uint32_t>> per_beam_candidates(const HitMatrix& L,
                                                       int threshold);

}  // namespace lshbeam
