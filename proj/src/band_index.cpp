#include "lshbeam/band_index.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lshbeam/rng.hpp"

namespace lshbeam {

namespace {

uint32_t next_pow2_log(size_t n) {
  uint32_t lg = 0;
  while ((size_t{1} << lg) < n) ++lg;
  return lg;
}

}  // namespace

CuckooTable::CuckooTable(uint32_t lg, uint64_t mul0, uint64_t mul1,
                         std::vector<Slot> slots)
    : lg_(lg), slots_(std::move(slots)) {
  mul_[0] = mul0;
  mul_[1] = mul1;
  if (slots_.size() != 2 * capacity())
    throw std::invalid_argument("CuckooTable: slot array size mismatch");
}

CuckooTable CuckooTable::build(
    const std::vector<std::pair<uint32_t, Span>>& entries, uint64_t seed) {
  for (const auto& [key, span] : entries) {
    if (key >= kEmptyCode)
      throw std::invalid_argument("CuckooTable: key collides with sentinel");
  }

  CuckooTable t;
  t.lg_ = std::max(1u, next_pow2_log(entries.size()));
  const uint32_t cap = t.capacity();

  SplitMix64 g(seed);
  for (int attempt = 0; attempt <= kMaxRebuilds; ++attempt) {
    t.mul_[0] = g.next() | 1;
    t.mul_[1] = g.next() | 1;
    t.slots_.assign(2 * cap, Slot{});

    bool ok = true;
    for (const auto& [key, span] : entries) {
      Slot cur{key, span.start, span.length};
      int table = 0;
      bool placed = false;
      for (int hop = 0; hop < kMaxDisplacements; ++hop) {
        Slot& s = t.slots_[table * cap + t.slot_of(table, cur.key)];
        std::swap(cur, s);
        if (cur.key == kEmptyCode) {
          placed = true;
          break;
        }
        table = 1 - table;  // evicted entry goes to its other table
      }
      if (!placed) {
        ok = false;
        break;
      }
    }
    if (ok) return t;
  }
  throw std::runtime_error("CuckooTable: build failed after rebuild budget");
}

std::optional<CuckooTable::Span> CuckooTable::find_counted(uint32_t key,
                                                           int& probes) const {
  const uint32_t cap = capacity();
  const Slot& s0 = slots_[slot_of(0, key)];
  probes = 1;
  if (s0.key == key) return Span{s0.start, s0.length};
  const Slot& s1 = slots_[cap + slot_of(1, key)];
  probes = 2;
  if (s1.key == key) return Span{s1.start, s1.length};
  return std::nullopt;
}

std::optional<CuckooTable::Span> CuckooTable::find(uint32_t key) const {
  int probes = 0;
  return find_counted(key, probes);
}

BandIndex BandIndex::build(const MatU32& band_codes, uint64_t seed) {
  const uint32_t vocab = static_cast<uint32_t>(band_codes.rows());
  const int W = static_cast<int>(band_codes.cols());
  std::vector<uint32_t> word_ids(static_cast<size_t>(W) * vocab);
  std::vector<CuckooTable> tables(W, CuckooTable(1, 1, 1, {{}, {}, {}, {}}));

  bool failed = false;
#pragma omp parallel
  {
    // (code, word id) keys; sorting groups ids by code and keeps ids
    // ascending within a span.
    std::vector<uint64_t> keys(vocab);
    std::vector<std::pair<uint32_t, CuckooTable::Span>> entries;
#pragma omp for schedule(dynamic)
    for (int w = 0; w < W; ++w) {
      for (uint32_t j = 0; j < vocab; ++j) {
        keys[j] = (static_cast<uint64_t>(band_codes(j, w)) << 32) | j;
      }
      std::sort(keys.begin(), keys.end());

      uint32_t* ids = word_ids.data() + static_cast<size_t>(w) * vocab;
      entries.clear();
      for (uint32_t pos = 0; pos < vocab; ++pos) {
        const uint32_t code = static_cast<uint32_t>(keys[pos] >> 32);
        ids[pos] = static_cast<uint32_t>(keys[pos]);
        if (pos == 0 || code != static_cast<uint32_t>(keys[pos - 1] >> 32)) {
          entries.push_back({code, {pos, 1}});
        } else {
          entries.back().second.length++;
        }
      }
      try {
        tables[w] = CuckooTable::build(entries, mix_seed(seed, w));
      } catch (const std::runtime_error&) {
#pragma omp atomic write
        failed = true;
      }
    }
  }
  if (failed)
    throw std::runtime_error("BandIndex: cuckoo build failed");
  return BandIndex(vocab, W, std::move(word_ids), std::move(tables));
}

void BandIndex::lookup_hits_into(const MatU32& query_codes,
                                 HitMatrix& L) const {
  if (static_cast<int>(query_codes.cols()) != W_)
    throw std::invalid_argument("lookup_hits: band count mismatch");
  const int B = static_cast<int>(query_codes.rows());
  if (L.rows() != static_cast<size_t>(B) || L.cols() != vocab_)
    L = HitMatrix(B, vocab_);
  else
    L.fill(0);

  int32_t* counts = L.data();
  const int64_t total = static_cast<int64_t>(B) * W_;
  // Dynamic schedule spreads skewed span lengths over workers; atomic
  // integer increments keep the counts exact either way.
#pragma omp parallel for schedule(dynamic, 16)
  for (int64_t iw = 0; iw < total; ++iw) {
    const int i = static_cast<int>(iw / W_);
    const int w = static_cast<int>(iw % W_);
    const auto span = tables_[w].find(query_codes(i, w));
    if (!span) continue;
    const uint32_t* ids =
        word_ids_.data() + static_cast<size_t>(w) * vocab_ + span->start;
    int32_t* row = counts + static_cast<size_t>(i) * vocab_;
    for (uint32_t k = 0; k < span->length; ++k) {
#pragma omp atomic update
      row[ids[k]]++;
    }
  }
}

HitMatrix BandIndex::lookup_hits(const MatU32& query_codes) const {
  HitMatrix L;
  lookup_hits_into(query_codes, L);
  return L;
}

std::vector<uint32_t> BandIndex::distinct_codes_per_band() const {
  std::vector<uint32_t> out(W_);
  for (int w = 0; w < W_; ++w) {
    uint32_t n = 0;
    for (const auto& s : tables_[w].slots())
      if (s.key != kEmptyCode) ++n;
    out[w] = n;
  }
  return out;
}

uint32_t BandIndex::max_span_length() const {
  uint32_t best = 0;
  for (const auto& t : tables_)
    for (const auto& s : t.slots())
      if (s.key != kEmptyCode) best = std::max(best, s.length);
  return best;
}

LshIndex build_lsh_index(const MatF& embeddings, const WtaParams& params,
                         uint64_t index_seed) {
  PermutationSet perms =
      generate_permutations(static_cast<int>(embeddings.cols()), params);
  MatU32 codes = hash_matrix(embeddings, perms, params);
  return LshIndex{params, static_cast<int>(embeddings.cols()),
                  std::move(perms), BandIndex::build(codes, index_seed)};
}

namespace {

constexpr char kIndexMagic[7] = {'W', 'T', 'A', 'I', 'D', 'X', '1'};

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw std::runtime_error("index file: truncated");
  return v;
}

}  // namespace

void save_lsh_index(const LshIndex& index, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(kIndexMagic, sizeof(kIndexMagic));
  put<uint32_t>(f, index.bands.vocab_size());
  put<uint32_t>(f, index.params.W);
  put<uint32_t>(f, index.params.K);
  put<uint32_t>(f, index.params.u);
  put<uint32_t>(f, index.params.bits_per_index());
  put<uint32_t>(f, index.dim);
  put<uint64_t>(f, index.params.seed);
  for (int w = 0; w < index.params.W; ++w) {
    const CuckooTable& t = index.bands.table(w);
    put<uint32_t>(f, t.log2_capacity());
    put<uint64_t>(f, t.multiplier(0));
    put<uint64_t>(f, t.multiplier(1));
    for (const auto& s : t.slots()) {
      put<uint32_t>(f, s.key);
      put<uint32_t>(f, s.start);
      put<uint32_t>(f, s.length);
    }
    auto ids = index.bands.band_words(w);
    f.write(reinterpret_cast<const char*>(ids.data()),
            static_cast<std::streamsize>(ids.size() * sizeof(uint32_t)));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

LshIndex load_lsh_index(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[7];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kIndexMagic, sizeof(magic)) != 0)
    throw std::runtime_error("index file: bad magic");
  const uint32_t vocab = get<uint32_t>(f);
  const uint32_t W = get<uint32_t>(f);
  const uint32_t K = get<uint32_t>(f);
  const uint32_t u = get<uint32_t>(f);
  const uint32_t bits = get<uint32_t>(f);
  const uint32_t dim = get<uint32_t>(f);
  const uint64_t seed = get<uint64_t>(f);
  WtaParams params(static_cast<int>(K), static_cast<int>(u),
                   static_cast<int>(W), seed);
  if (bits != static_cast<uint32_t>(params.bits_per_index()))
    throw std::runtime_error("index file: inconsistent bits_per_index");

  std::vector<uint32_t> word_ids(static_cast<size_t>(W) * vocab);
  std::vector<CuckooTable> tables;
  tables.reserve(W);
  for (uint32_t w = 0; w < W; ++w) {
    const uint32_t lg = get<uint32_t>(f);
    const uint64_t mul0 = get<uint64_t>(f);
    const uint64_t mul1 = get<uint64_t>(f);
    std::vector<CuckooTable::Slot> slots(2ull << lg);
    for (auto& s : slots) {
      s.key = get<uint32_t>(f);
      s.start = get<uint32_t>(f);
      s.length = get<uint32_t>(f);
    }
    tables.emplace_back(lg, mul0, mul1, std::move(slots));
    f.read(reinterpret_cast<char*>(word_ids.data() +
                                   static_cast<size_t>(w) * vocab),
           static_cast<std::streamsize>(vocab * sizeof(uint32_t)));
    if (!f) throw std::runtime_error("index file: truncated");
  }
  PermutationSet perms =
      PermutationSet::generate(static_cast<int>(dim), params.num_hashes(),
                               params.K, params.seed);
  return LshIndex{params, static_cast<int>(dim), std::move(perms),
                  BandIndex(vocab, static_cast<int>(W), std::move(word_ids),
                            std::move(tables))};
}

}  // namespace lshbeam
