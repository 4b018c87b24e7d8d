#include "lshbeam/candidate_selector.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

namespace lshbeam {

bool CandidateSet::contains(uint32_t id) const {
  return std::binary_search(word_ids.begin(), word_ids.end(), id);
}

CandidateSet select_candidates(const HitMatrix& L, int threshold) {
  if (threshold < 0)
    throw std::invalid_argument("select_candidates: negative threshold");
  const int64_t vocab = static_cast<int64_t>(L.cols());
  const int B = static_cast<int>(L.rows());

  CandidateSet out;
  if (threshold == 0) {
    // Every word survives a zero threshold.
    out.word_ids.resize(vocab);
    for (int64_t j = 0; j < vocab; ++j) out.word_ids[j] = j;
    out.from_threshold = static_cast<uint32_t>(vocab);
    return out;
  }

  constexpr int64_t kChunk = 4096;
  const int64_t nchunks = (vocab + kChunk - 1) / kChunk;
  std::vector<std::vector<uint32_t>> parts(nchunks);

#pragma omp parallel for schedule(dynamic)
  for (int64_t c = 0; c < nchunks; ++c) {
    const int64_t lo = c * kChunk;
    const int64_t hi = std::min(vocab, lo + kChunk);
    auto& part = parts[c];
    for (int64_t j = lo; j < hi; ++j) {
      for (int i = 0; i < B; ++i) {
        if (L(i, j) >= threshold) {
          part.push_back(static_cast<uint32_t>(j));
          break;
        }
      }
    }
  }

  size_t total = 0;
  for (const auto& part : parts) total += part.size();
  out.word_ids.reserve(total);
  for (const auto& part : parts)
    out.word_ids.insert(out.word_ids.end(), part.begin(), part.end());
  out.from_threshold = static_cast<uint32_t>(total);
  return out;
}

CandidateSet merge_top_frequent(CandidateSet cands, uint32_t top_merge,
                                std::span<const uint32_t> specials,
                                uint32_t vocab) {
  if (top_merge > vocab)
    throw std::invalid_argument("merge_top_frequent: T exceeds vocabulary");

  std::vector<uint32_t> extra(specials.begin(), specials.end());
  std::sort(extra.begin(), extra.end());
  extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
  for (uint32_t id : extra) {
    if (id >= vocab)
      throw std::invalid_argument("merge_top_frequent: special id " +
                                  std::to_string(id) + " out of range");
  }

  CandidateSet out;
  out.from_threshold = cands.from_threshold;
  out.word_ids.reserve(cands.word_ids.size() + top_merge + extra.size());

  // ids < T form a prefix of the result; count how many are new.
  size_t ci = 0;
  uint32_t seen_below_top = 0;
  for (; ci < cands.word_ids.size() && cands.word_ids[ci] < top_merge; ++ci)
    ++seen_below_top;
  for (uint32_t id = 0; id < top_merge; ++id) out.word_ids.push_back(id);
  out.from_top = top_merge - seen_below_top;

  size_t si = 0;
  while (si < extra.size() && extra[si] < top_merge) ++si;
  while (ci < cands.word_ids.size() || si < extra.size()) {
    uint32_t next;
    bool from_special = false;
    if (si == extra.size() ||
        (ci < cands.word_ids.size() && cands.word_ids[ci] <= extra[si])) {
      next = cands.word_ids[ci];
      if (si < extra.size() && extra[si] == next) ++si;
      ++ci;
    } else {
      next = extra[si++];
      from_special = true;
    }
    if (!out.word_ids.empty() && out.word_ids.back() == next) continue;
    out.word_ids.push_back(next);
    if (from_special) ++out.from_specials;
  }
  return out;
}

GatheredEmbeddings gather_embeddings(const MatF& E,
                                     const CandidateSet& cands) {
  const size_t d = E.cols();
  GatheredEmbeddings out;
  out.rows = MatF(cands.word_ids.size(), d);
  out.id_map = cands.word_ids;

  const int64_t n = static_cast<int64_t>(cands.word_ids.size());
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < n; ++r) {
    const uint32_t id = cands.word_ids[r];
    std::memcpy(out.rows.row(r).data(), E.row(id).data(), d * sizeof(float));
  }
  return out;
}

void DecodeConfig::validate(uint32_t vocab, int num_bands) const {
  if (beam < 1) throw std::invalid_argument("config: beam must be >= 1");
  if (top_merge > vocab)
    throw std::invalid_argument("config: T exceeds vocabulary size");
  if (threshold < 0 || threshold > num_bands)
    throw std::invalid_argument("config: t must be in [0, W]");
  if (max_len < 1) throw std::invalid_argument("config: steps must be >= 1");
  for (uint32_t id : specials) {
    if (id >= vocab)
      throw std::invalid_argument("config: special id out of range");
  }
}

}  // namespace lshbeam
