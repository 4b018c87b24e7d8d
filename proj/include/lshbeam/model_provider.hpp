#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lshbeam/matrix.hpp"

namespace lshbeam {

// Deterministic synthetic recurrent scorer over a frequency-sorted
// vocabulary (id 0 is the most frequent word). Stands in for a trained
// sequence model so decoding and benchmarking need no external weights.
//
// All tensors come from one SplitMix64 stream seeded with `seed`, drawn in
// this order: embeddings (row-major), w_hidden, w_embed (both scaled by
// 1/sqrt(d)), then h0 = tanh(gaussian) per entry. The logit bias is
// bias_strength * (1/(1+j) - mean), a Zipf-like boost for frequent words.
struct SynthModel {
  uint32_t vocab = 0;
  int dim = 0;
  uint64_t seed = 0;
  float bias_strength = 0.0f;
  uint32_t eos_id = 0;  // fixed to vocab-1

  MatF embeddings;  // |V| x d output embeddings
  MatF w_hidden;    // d x d
  MatF w_embed;     // d x d
  std::vector<float> h0;
  std::vector<float> freq_bias;  // length |V|
};

SynthModel synth_model(uint32_t vocab, int dim, uint64_t seed,
                       float bias_strength);

// Same model construction but around an externally supplied embedding
// matrix; the recurrent tensors are drawn first from the seed stream since
// no embedding draws precede them.
SynthModel synth_model_with_embeddings(MatF embeddings, uint64_t seed,
                                       float bias_strength);

// h' = tanh(W_h h + W_e emb(token)). Throws on a token outside the
// vocabulary; output entries are in [-1, 1] by construction.
void step_hidden(const SynthModel& model, std::span<const float> h,
                 uint32_t token, std::span<float> out);
std::vector<float> step_hidden(const SynthModel& model,
                               std::span<const float> h, uint32_t token);

// Embedding file format, little-endian:
//   "WTAEMB1" | version byte 0x01 | u32 vocab | u32 dim | vocab*dim f32
void save_embeddings(const MatF& E, const std::string& path);
MatF load_embeddings(const std::string& path);

}  // namespace lshbeam
