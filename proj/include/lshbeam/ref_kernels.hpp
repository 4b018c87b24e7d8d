#pragma once

#include <cstdint>
#include <vector>

#include "lshbeam/band_index.hpp"
#include "lshbeam/matrix.hpp"
#include "lshbeam/wta_hash.hpp"

namespace lshbeam::ref {

// Serial reference implementations of the parallel kernels. They are written
// as the plainest possible loops, share no scheduling or accumulation logic
// with the OpenMP versions, and exist so tests and the kernel benchmark can
// compare the two paths.

// Per-row scalar hashing path.
MatU32 hash_matrix(const MatF& M, const PermutationSet& perms,
                   const WtaParams& params);

// Hit counting without any index: compares every (query row, word, band)
// code pair directly.
HitMatrix lookup_hits(const MatU32& vocab_codes, const MatU32& query_codes);

// Single linear scan per column.
std::vector<uint32_t> select_candidates(const HitMatrix& L, int threshold);

// Triple loop logits.
MatF compute_logits(const MatF& H, const MatF& E_sub);

// Row-at-a-time softmax with max subtraction.
MatF softmax_rows(const MatF& logits);

}  // namespace lshbeam::ref
