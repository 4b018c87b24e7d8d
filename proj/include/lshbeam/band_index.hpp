#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lshbeam/matrix.hpp"
#include "lshbeam/wta_hash.hpp"

namespace lshbeam {

// Per-beam, per-word band collision counters.
using HitMatrix = MatI32;

// Static two-table cuckoo map from band code to a (start, length) span.
// Lookups hash and compare at most twice; keys live in exactly one of their
// two candidate slots. Slot keys use kEmptyCode as the empty marker, which
// pack_bands can never emit.
class CuckooTable {
 public:
  struct Span {
    uint32_t start;
    uint32_t length;
    bool operator==(const Span&) const = default;
  };

  struct Slot {
    uint32_t key = kEmptyCode;
    uint32_t start = 0;
    uint32_t length = 0;
  };

  // Builds from distinct keys. Per-array capacity is the smallest power of
  // two >= the entry count, so the combined load factor never exceeds 0.5.
  // Insertion evicts along chains of up to kMaxDisplacements; a failed chain
  // redraws both hash multipliers from the seed stream and starts over, up
  // to kMaxRebuilds times.
  static CuckooTable build(
      const std::vector<std::pair<uint32_t, Span>>& entries, uint64_t seed);

  std::optional<Span> find(uint32_t key) const;
  // Same lookup, reporting how many slots were inspected (always 1 or 2).
  std::optional<Span> find_counted(uint32_t key, int& probes) const;

  uint32_t capacity() const { return 1u << lg_; }  // per array
  uint32_t log2_capacity() const { return lg_; }
  uint64_t multiplier(int table) const { return mul_[table]; }
  const std::vector<Slot>& slots() const { return slots_; }

  // Raw-state constructor for deserialization.
  CuckooTable(uint32_t lg, uint64_t mul0, uint64_t mul1,
              std::vector<Slot> slots);

  static constexpr int kMaxDisplacements = 128;
  static constexpr int kMaxRebuilds = 8;

 private:
  CuckooTable() = default;
  uint32_t slot_of(int table, uint32_t key) const {
    // Multiply-shift over the 31-bit key; mul_ is odd.
    return static_cast<uint32_t>((mul_[table] * key) >> (64 - lg_));
  }

  uint32_t lg_ = 0;
  uint64_t mul_[2] = {1, 1};
  std::vector<Slot> slots_;  // both arrays back to back, 2 * capacity()
};

// Per-band inverted index over a hashed vocabulary: band w owns a flat
// word-id array whose spans group words by band code (ascending word id
// inside a span, spans ordered by code), plus a cuckoo table from code to
// span.
class BandIndex {
 public:
  // band_codes: |V| x W matrix as produced by hash_matrix over the
  // embedding matrix.
  static BandIndex build(const MatU32& band_codes, uint64_t seed);

  uint32_t vocab_size() const { return vocab_; }
  int num_bands() const { return W_; }

  std::span<const uint32_t> band_words(int w) const {
    return {word_ids_.data() + static_cast<size_t>(w) * vocab_, vocab_};
  }
  const CuckooTable& table(int w) const { return tables_[w]; }

  // L[i,j] = number of bands where query row i and word j share a code.
  // Work is partitioned over (beam, band) pairs; counter increments are
  // atomic, so the result is exact under any schedule.
  HitMatrix lookup_hits(const MatU32& query_codes) const;
  // Same, accumulating into a caller-owned matrix (zeroed here) to avoid
  // per-step allocation.
  void lookup_hits_into(const MatU32& query_codes, HitMatrix& L) const;

  // For reporting: distinct codes and longest span per band.
  std::vector<uint32_t> distinct_codes_per_band() const;
  uint32_t max_span_length() const;

  BandIndex(uint32_t vocab, int W, std::vector<uint32_t> word_ids,
            std::vector<CuckooTable> tables)
      : vocab_(vocab),
        W_(W),
        word_ids_(std::move(word_ids)),
        tables_(std::move(tables)) {}

 private:
  uint32_t vocab_ = 0;
  int W_ = 0;
  std::vector<uint32_t> word_ids_;  // W x |V|, band-major
  std::vector<CuckooTable> tables_;
};

// Index plus everything needed to hash queries against it.
struct LshIndex {
  WtaParams params;
  int dim;
  PermutationSet perms;  // regenerated from (dim, params) on load
  BandIndex bands;
};

LshIndex build_lsh_index(const MatF& embeddings, const WtaParams& params,
                         uint64_t index_seed);

// Versioned binary format, little-endian throughout:
//   "WTAIDX1" | u32 vocab,W,K,u,bits_per_index,dim | u64 perm_seed
//   per band: u32 lg | u64 mul0,mul1 | 2*2^lg slots (u32 key,start,length)
//             | vocab u32 word ids
// Save/load round-trips bit-exactly.
void save_lsh_index(const LshIndex& index, const std::string& path);
LshIndex load_lsh_index(const std::string& path);

}  // namespace lshbeam
