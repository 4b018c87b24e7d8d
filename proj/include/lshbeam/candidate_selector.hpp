#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lshbeam/band_index.hpp"
#include "lshbeam/matrix.hpp"

namespace lshbeam {

// Shared runtime vocabulary for one decode step: sorted, deduplicated word
// ids plus counters recording where they came from.
struct CandidateSet {
  std::vector<uint32_t> word_ids;  // strictly ascending
  uint32_t from_threshold = 0;
  uint32_t from_top = 0;
  uint32_t from_specials = 0;

  size_t size() const { return word_ids.size(); }
  bool contains(uint32_t id) const;
};

// Words j with L[i,j] >= t for at least one beam row i, ascending. Columns
// are scanned in fixed-size chunks whose outputs are concatenated in chunk
// order, so the result is identical for any worker count.
CandidateSet select_candidates(const HitMatrix& L, int threshold);

// Union with the top-T most frequent words (ids [0, T) by the frequency-
// sorted vocabulary contract) and the special ids. Throws if T > vocab.
CandidateSet merge_top_frequent(CandidateSet cands, uint32_t top_merge,
                                std::span<const uint32_t> specials,
                                uint32_t vocab);

struct GatheredEmbeddings {
  MatF rows;                     // |cands| x d
  std::vector<uint32_t> id_map;  // local row -> global word id
};

// Copies candidate rows of E into a contiguous matrix for batched matmul.
GatheredEmbeddings gather_embeddings(const MatF& E, const CandidateSet& cands);

// Hyperparameters of one decode run: {B, T, t} plus the step cap and the
// ids (EOS at minimum) that are always kept in the candidate set.
struct DecodeConfig {
  int beam = 1;
  uint32_t top_merge = 0;  // T
  int threshold = 1;       // t
  int max_len = 16;
  std::vector<uint32_t> specials;

  // Validates against a model/index pair: B >= 1, T <= vocab, 0 <= t <= W.
  void validate(uint32_t vocab, int num_bands) const;
};

}  // namespace lshbeam
