#include "lshbeam/beam_decoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lshbeam/eval_oracle.hpp"

namespace lshbeam {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

MatF compute_logits(const MatF& H, const MatF& E_sub) {
  if (H.cols() != E_sub.cols())
    throw std::invalid_argument("compute_logits: inner dimensions disagree");
  const int64_t rows = static_cast<int64_t>(H.rows());
  const int64_t n = static_cast<int64_t>(E_sub.rows());
  const int64_t d = static_cast<int64_t>(H.cols());
  MatF out(rows, n);

  const float* hp = H.data();
  const float* ep = E_sub.data();
  float* op = out.data();
#pragma omp parallel for schedule(static)
  for (int64_t ir = 0; ir < rows * n; ++ir) {
    const float* h = hp + (ir / n) * d;
    const float* e = ep + (ir % n) * d;
    float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
    for (int64_t c = 0; c < d; ++c) acc += h[c] * e[c];
    op[ir] = acc;
  }
  return out;
}

MatF softmax_rows(const MatF& logits) {
  const int64_t rows = static_cast<int64_t>(logits.rows());
  const int64_t n = static_cast<int64_t>(logits.cols());
  MatF out(rows, n);

  bool empty_row = false;
#pragma omp parallel for schedule(static) reduction(|| : empty_row)
  for (int64_t i = 0; i < rows; ++i) {
    const float* in = logits.row(i).data();
    float* o = out.row(i).data();
    float mx = -std::numeric_limits<float>::infinity();
    for (int64_t j = 0; j < n; ++j) mx = std::max(mx, in[j]);
    if (n == 0 || (std::isinf(mx) && mx < 0)) {
      empty_row = true;
      continue;
    }
    double denom = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double e = std::exp(static_cast<double>(in[j]) - mx);
      o[j] = static_cast<float>(e);
      denom += e;
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (int64_t j = 0; j < n; ++j) o[j] *= inv;
  }
  if (empty_row)
    throw std::invalid_argument("softmax_rows: row without finite entries");
  return out;
}

std::vector<BeamChoice> expand_beams(const MatF& probs,
                                     std::span<const double> cum_scores,
                                     std::span<const uint32_t> live_beam_ids,
                                     std::span<const BeamChoice> frozen, int B,
                                     std::span<const uint32_t> id_map) {
  const size_t rows = probs.rows();
  const size_t n = probs.cols();
  if (cum_scores.size() != rows || live_beam_ids.size() != rows)
    throw std::invalid_argument("expand_beams: row metadata mismatch");
  if (!id_map.empty() && id_map.size() != n)
    throw std::invalid_argument("expand_beams: id_map size mismatch");

  std::vector<BeamChoice> pool;
  pool.reserve(rows * n + frozen.size());
  pool.insert(pool.end(), frozen.begin(), frozen.end());
  for (size_t i = 0; i < rows; ++i) {
    const float* p = probs.row(i).data();
    for (size_t r = 0; r < n; ++r) {
      const int64_t word =
          id_map.empty() ? static_cast<int64_t>(r) : id_map[r];
      pool.push_back(BeamChoice{
          cum_scores[i] + std::log(static_cast<double>(p[r])),
          live_beam_ids[i], word});
    }
  }

  const auto better = [](const BeamChoice& a, const BeamChoice& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.beam != b.beam) return a.beam < b.beam;
    return a.word < b.word;
  };
  const size_t keep = std::min<size_t>(B, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + keep, pool.end(), better);
  pool.resize(keep);
  return pool;
}

DecodeMode parse_mode(const std::string& s) {
  if (s == "full") return DecodeMode::kFull;
  if (s == "lsh") return DecodeMode::kLsh;
  if (s == "top") return DecodeMode::kTopOnly;
  throw std::invalid_argument("unknown mode: " + s);
}

const char* mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kFull: return "full";
    case DecodeMode::kLsh: return "lsh";
    case DecodeMode::kTopOnly: return "top";
  }
  return "?";
}

double DecodeResult::mean_vlsh() const {
  if (per_step_vlsh.empty()) return 0.0;
  double s = 0.0;
  for (uint32_t v : per_step_vlsh) s += v;
  return s / per_step_vlsh.size();
}

double DecodeResult::mean_recall() const {
  if (per_step_recall.empty()) return 0.0;
  double s = 0.0;
  for (double v : per_step_recall) s += v;
  return s / per_step_recall.size();
}

DecodeResult decode(const SynthModel& model, const DecodeConfig& config,
                    DecodeMode mode, const LshIndex* lsh, bool with_oracle) {
  if (mode == DecodeMode::kLsh) {
    if (lsh == nullptr)
      throw std::invalid_argument("decode: lsh mode requires an index");
    if (lsh->bands.vocab_size() != model.vocab || lsh->dim != model.dim)
      throw std::invalid_argument("decode: index does not match the model");
    config.validate(model.vocab, lsh->params.W);
  } else {
    config.validate(model.vocab, std::max(config.threshold, 0));
  }

  // EOS is always a candidate; a list without it could never terminate.
  std::vector<uint32_t> specials = config.specials;
  specials.push_back(model.eos_id);

  DecodeResult res;
  std::vector<Hypothesis> hyps;
  hyps.push_back(Hypothesis{{}, 0.0, false, model.h0});

  HitMatrix L;
  MatU32 query_codes;

  for (int step = 0; step < config.max_len; ++step) {
    std::vector<uint32_t> live;
    for (size_t i = 0; i < hyps.size(); ++i)
      if (!hyps[i].finished) live.push_back(static_cast<uint32_t>(i));
    if (live.empty()) break;

    MatF H(live.size(), model.dim);
    for (size_t i = 0; i < live.size(); ++i) {
      std::copy(hyps[live[i]].hidden.begin(), hyps[live[i]].hidden.end(),
                H.row(i).begin());
    }

    // Candidate construction.
    CandidateSet cands;
    GatheredEmbeddings gathered;
    const MatF* e_sub = nullptr;
    bool full_vocab = false;
    switch (mode) {
      case DecodeMode::kFull: {
        full_vocab = true;
        e_sub = &model.embeddings;
        break;
      }
      case DecodeMode::kTopOnly: {
        auto t0 = Clock::now();
        cands = merge_top_frequent(CandidateSet{}, config.top_merge, specials,
                                   model.vocab);
        res.stages.construct_candidate_list += ms_since(t0);
        t0 = Clock::now();
        gathered = gather_embeddings(model.embeddings, cands);
        res.stages.construct_e_lsh += ms_since(t0);
        e_sub = &gathered.rows;
        break;
      }
      case DecodeMode::kLsh: {
        auto t0 = Clock::now();
        query_codes = hash_matrix(H, lsh->perms, lsh->params);
        res.stages.wta_hash += ms_since(t0);

        t0 = Clock::now();
        lsh->bands.lookup_hits_into(query_codes, L);
        res.stages.cuckoo_lookup += ms_since(t0);

        t0 = Clock::now();
        cands = select_candidates(L, config.threshold);
        cands = merge_top_frequent(std::move(cands), config.top_merge,
                                   specials, model.vocab);
        res.stages.construct_candidate_list += ms_since(t0);

        t0 = Clock::now();
        gathered = gather_embeddings(model.embeddings, cands);
        res.stages.construct_e_lsh += ms_since(t0);
        e_sub = &gathered.rows;
        break;
      }
    }
    if (!full_vocab && cands.word_ids.empty())
      throw std::runtime_error("decode: empty candidate set");

    const size_t n_cand = full_vocab ? model.vocab : cands.size();
    res.per_step_vlsh.push_back(static_cast<uint32_t>(n_cand));
    if (!full_vocab) {
      res.threshold_survivors += cands.from_threshold;
      res.top_added += cands.from_top;
      res.specials_added += cands.from_specials;
    }

    // Restricted (or full) softmax.
    StepOutput step_out;
    auto t0 = Clock::now();
    step_out.logits = compute_logits(H, *e_sub);
    {
      const int64_t rows = static_cast<int64_t>(step_out.logits.rows());
      const int64_t n = static_cast<int64_t>(step_out.logits.cols());
      const uint32_t* ids = full_vocab ? nullptr : gathered.id_map.data();
      const float* bias = model.freq_bias.data();
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < rows; ++i) {
        float* row = step_out.logits.row(i).data();
        for (int64_t r = 0; r < n; ++r) row[r] += bias[ids ? ids[r] : r];
      }
    }
    res.stages.matrix_multiply += ms_since(t0);

    t0 = Clock::now();
    step_out.probs = softmax_rows(step_out.logits);
    res.stages.normalization += ms_since(t0);

    // Oracle recall, measured outside the softmax path.
    if (with_oracle) {
      t0 = Clock::now();
      if (full_vocab) {
        res.per_step_recall.push_back(1.0);
      } else {
        MatF full_logits = compute_logits(H, model.embeddings);
        const int64_t rows = static_cast<int64_t>(full_logits.rows());
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < rows; ++i) {
          float* row = full_logits.row(i).data();
          for (uint32_t j = 0; j < model.vocab; ++j)
            row[j] += model.freq_bias[j];
        }
        TopB top = exact_topb_logits(full_logits, config.beam);
        res.per_step_recall.push_back(recall_at_b(cands, top.ids).mean);
      }
      res.stages.oracle += ms_since(t0);
    }

    // Beam expansion.
    t0 = Clock::now();
    std::vector<double> cum(live.size());
    for (size_t i = 0; i < live.size(); ++i) cum[i] = hyps[live[i]].score;
    std::vector<BeamChoice> frozen;
    for (size_t i = 0; i < hyps.size(); ++i) {
      if (hyps[i].finished)
        frozen.push_back(
            BeamChoice{hyps[i].score, static_cast<uint32_t>(i), -1});
    }
    step_out.chosen = expand_beams(
        step_out.probs, cum, live,
        frozen, config.beam,
        full_vocab ? std::span<const uint32_t>{}
                   : std::span<const uint32_t>(gathered.id_map));
    res.stages.beam_expansion += ms_since(t0);

    // Materialize the next beam state.
    t0 = Clock::now();
    std::vector<Hypothesis> next;
    next.reserve(step_out.chosen.size());
    for (const BeamChoice& c : step_out.chosen) {
      const Hypothesis& parent = hyps[c.beam];
      if (c.word < 0) {
        next.push_back(parent);  // frozen hypothesis carried over
        continue;
      }
      Hypothesis h;
      h.tokens = parent.tokens;
      h.tokens.push_back(static_cast<uint32_t>(c.word));
      h.score = c.score;
      h.finished = static_cast<uint32_t>(c.word) == model.eos_id;
      if (h.finished) {
        h.hidden = parent.hidden;  // frozen; never stepped again
      } else {
        h.hidden = step_hidden(model, parent.hidden,
                               static_cast<uint32_t>(c.word));
      }
      next.push_back(std::move(h));
    }
    hyps = std::move(next);
    res.stages.recurrence += ms_since(t0);
    ++res.steps;

    bool all_done = true;
    for (const auto& h : hyps) all_done = all_done && h.finished;
    if (all_done) break;
  }

  std::stable_sort(hyps.begin(), hyps.end(),
                   [](const Hypothesis& a, const Hypothesis& b) {
                     return a.score > b.score;
                   });
  res.hypotheses = std::move(hyps);
  return res;
}

}  // namespace lshbeam
