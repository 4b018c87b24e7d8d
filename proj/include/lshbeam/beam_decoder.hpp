#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lshbeam/band_index.hpp"
#include "lshbeam/candidate_selector.hpp"
#include "lshbeam/matrix.hpp"
#include "lshbeam/model_provider.hpp"

namespace lshbeam {

// Logit[i,r] = dot(H[i], E_sub[r]) over all rows in one batched pass.
MatF compute_logits(const MatF& H, const MatF& E_sub);

// Row-wise exp-normalize with max subtraction; the denominator covers only
// the columns present (the candidate set). Throws if a row is all -inf.
MatF softmax_rows(const MatF& logits);

struct BeamChoice {
  double score;   // cumulative log-probability
  uint32_t beam;  // source row
  int64_t word;   // global word id; -1 marks a frozen (finished) hypothesis
};

// Global top-B continuations over all (live row x candidate) pairs plus the
// frozen hypotheses, which compete with their carried scores. Deterministic
// tie-break: higher score first, then smaller beam, then smaller word
// (frozen entries use word -1 and therefore win ties inside their beam).
std::vector<BeamChoice> expand_beams(
    const MatF& probs, std::span<const double> cum_scores,
    std::span<const uint32_t> live_beam_ids,
    std::span<const BeamChoice> frozen, int B,
    std::span<const uint32_t> id_map);

enum class DecodeMode { kFull, kLsh, kTopOnly };

DecodeMode parse_mode(const std::string& s);  // "full" | "lsh" | "top"
const char* mode_name(DecodeMode mode);

struct Hypothesis {
  std::vector<uint32_t> tokens;
  double score = 0.0;
  bool finished = false;
  std::vector<float> hidden;
};

// One decode step's tensors, kept around mainly for tests and reporting.
struct StepOutput {
  MatF logits;                     // live rows x candidates
  MatF probs;                      // same shape, rows sum to 1
  std::vector<BeamChoice> chosen;  // B winners
};

// Wall-clock totals per pipeline stage, in milliseconds. The first six are
// the softmax path; expansion/recurrence/oracle run outside it.
struct StageTimes {
  double wta_hash = 0.0;
  double cuckoo_lookup = 0.0;
  double construct_candidate_list = 0.0;
  double construct_e_lsh = 0.0;
  double matrix_multiply = 0.0;
  double normalization = 0.0;
  double beam_expansion = 0.0;
  double recurrence = 0.0;
  double oracle = 0.0;

  double softmax_path() const {
    return wta_hash + cuckoo_lookup + construct_candidate_list +
           construct_e_lsh + matrix_multiply + normalization;
  }
};

struct DecodeResult {
  std::vector<Hypothesis> hypotheses;  // sorted by descending score
  int steps = 0;
  std::vector<uint32_t> per_step_vlsh;
  std::vector<double> per_step_recall;  // filled only with the oracle on
  uint64_t threshold_survivors = 0;     // provenance totals over steps
  uint64_t top_added = 0;
  uint64_t specials_added = 0;
  StageTimes stages;

  double mean_vlsh() const;
  double mean_recall() const;
};

// Runs beam search until every hypothesis emitted EOS or max_len steps.
// kFull scores the whole vocabulary each step; kLsh restricts it to the
// hash-selected candidate set; kTopOnly uses just the top-T prefix plus
// specials. `lsh` is required for kLsh and ignored otherwise. With
// `with_oracle`, each step also records recall of the exact top-B (by the
// model's full logits) against the step's candidate set.
DecodeResult decode(const SynthModel& model, const DecodeConfig& config,
                    DecodeMode mode, const LshIndex* lsh, bool with_oracle);

}  // namespace lshbeam
