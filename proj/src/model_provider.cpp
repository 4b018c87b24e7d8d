#include "lshbeam/model_provider.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "lshbeam/rng.hpp"

namespace lshbeam {

namespace {

void fill_gaussian(SplitMix64& g, MatF& m, float scale) {
  float* p = m.data();
  const size_t n = m.rows() * m.cols();
  for (size_t i = 0; i < n; ++i) p[i] = static_cast<float>(g.gaussian()) * scale;
}

void finish_model(SynthModel& model, SplitMix64& g) {
  const int d = model.dim;
  const float scale = 1.0f / std::sqrt(static_cast<float>(d));
  // The carry-over term dominates the token input by design: hypotheses in
  // one batch differ only in a few recent tokens, so their hidden states
  // stay close and their candidate sets overlap heavily. Sharing one
  // candidate list across the batch relies on exactly that overlap.
  model.w_hidden = MatF(d, d);
  fill_gaussian(g, model.w_hidden, scale);
  model.w_embed = MatF(d, d);
  fill_gaussian(g, model.w_embed, 0.02f * scale);
  model.h0.resize(d);
  for (int i = 0; i < d; ++i)
    model.h0[i] = std::tanh(static_cast<float>(g.gaussian()));

  // Mean-centered Zipf-like boost, computed in double then narrowed.
  model.freq_bias.resize(model.vocab);
  double sum = 0.0;
  for (uint32_t j = 0; j < model.vocab; ++j) sum += 1.0 / (1.0 + j);
  const double mean = sum / model.vocab;
  for (uint32_t j = 0; j < model.vocab; ++j) {
    model.freq_bias[j] = static_cast<float>(
        model.bias_strength * (1.0 / (1.0 + j) - mean));
  }
  model.eos_id = model.vocab - 1;
}

}  // namespace

SynthModel synth_model(uint32_t vocab, int dim, uint64_t seed,
                       float bias_strength) {
  if (vocab < 2) throw std::invalid_argument("synth_model: vocab must be >= 2");
  if (dim < 1) throw std::invalid_argument("synth_model: dim must be >= 1");
  SynthModel model;
  model.vocab = vocab;
  model.dim = dim;
  model.seed = seed;
  model.bias_strength = bias_strength;

  SplitMix64 g(seed);
  model.embeddings = MatF(vocab, dim);
  fill_gaussian(g, model.embeddings, 1.0f);
  finish_model(model, g);
  return model;
}

SynthModel synth_model_with_embeddings(MatF embeddings, uint64_t seed,
                                       float bias_strength) {
  if (embeddings.rows() < 2 || embeddings.cols() < 1)
    throw std::invalid_argument("synth_model: embedding matrix too small");
  SynthModel model;
  model.vocab = static_cast<uint32_t>(embeddings.rows());
  model.dim = static_cast<int>(embeddings.cols());
  model.seed = seed;
  model.bias_strength = bias_strength;
  model.embeddings = std::move(embeddings);

  SplitMix64 g(seed);
  finish_model(model, g);
  return model;
}

void step_hidden(const SynthModel& model, std::span<const float> h,
                 uint32_t token, std::span<float> out) {
  if (token >= model.vocab)
    throw std::invalid_argument("step_hidden: token " + std::to_string(token) +
                                " out of range");
  if (static_cast<int>(h.size()) != model.dim ||
      static_cast<int>(out.size()) != model.dim)
    throw std::invalid_argument("step_hidden: dimension mismatch");

  const int d = model.dim;
  const float* emb = model.embeddings.row(token).data();
  for (int r = 0; r < d; ++r) {
    const float* wh = model.w_hidden.row(r).data();
    const float* we = model.w_embed.row(r).data();
    float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
    for (int c = 0; c < d; ++c) acc += wh[c] * h[c] + we[c] * emb[c];
    out[r] = std::tanh(acc);
  }
}

std::vector<float> step_hidden(const SynthModel& model,
                               std::span<const float> h, uint32_t token) {
  std::vector<float> out(model.dim);
  step_hidden(model, h, token, out);
  return out;
}

namespace {
constexpr char kEmbMagic[7] = {'W', 'T', 'A', 'E', 'M', 'B', '1'};
constexpr uint8_t kEmbVersion = 0x01;
}  // namespace

void save_embeddings(const MatF& E, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(kEmbMagic, sizeof(kEmbMagic));
  f.write(reinterpret_cast<const char*>(&kEmbVersion), 1);
  const uint32_t vocab = static_cast<uint32_t>(E.rows());
  const uint32_t dim = static_cast<uint32_t>(E.cols());
  f.write(reinterpret_cast<const char*>(&vocab), sizeof(vocab));
  f.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  f.write(reinterpret_cast<const char*>(E.data()),
          static_cast<std::streamsize>(sizeof(float) * vocab * dim));
  if (!f) throw std::runtime_error("write failed: " + path);
}

MatF load_embeddings(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[7];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kEmbMagic, sizeof(magic)) != 0)
    throw std::runtime_error("embedding file: bad magic");
  uint8_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 1);
  if (!f || version != kEmbVersion)
    throw std::runtime_error("embedding file: unsupported version");
  uint32_t vocab = 0, dim = 0;
  f.read(reinterpret_cast<char*>(&vocab), sizeof(vocab));
  f.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  if (!f) throw std::runtime_error("embedding file: truncated header");

  MatF E(vocab, dim);
  f.read(reinterpret_cast<char*>(E.data()),
         static_cast<std::streamsize>(sizeof(float) * vocab * dim));
  if (!f || f.gcount() !=
                static_cast<std::streamsize>(sizeof(float) * vocab * dim))
    throw std::runtime_error(
        "embedding file: payload shorter than declared dimensions");
  return E;
}

}  // namespace lshbeam
