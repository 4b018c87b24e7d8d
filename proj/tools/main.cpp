// Benchmark CLI: builds hash indexes over embedding vocabularies, runs
// full / LSH / top-only beam decodes with stage timing breakdowns, and
// sweeps hyperparameter grids into CSV.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lshbeam/beam_decoder.hpp"
#include "lshbeam/rng.hpp"

using json = nlohmann::json;
using namespace lshbeam;

namespace {

struct SynthTriple {
  uint32_t vocab = 0;
  int dim = 0;
  uint64_t seed = 0;
};

// Parses the --synth V,D,S shorthand.
SynthTriple parse_synth(const std::string& s) {
  SynthTriple out;
  if (std::sscanf(s.c_str(), "%u,%d,%llu", &out.vocab, &out.dim,
                  reinterpret_cast<unsigned long long*>(&out.seed)) != 3)
    throw CLI::ValidationError("--synth expects V,D,SEED");
  return out;
}

void require_readable(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path))
    throw CLI::ValidationError(std::string(what) + " not found: " + path);
}

struct ModelFlags {
  uint32_t vocab = 1000;
  int dim = 64;
  uint64_t seed = 1;
  double bias = 0.0;
  std::string synth;  // V,D,S shorthand
  std::string emb_path;

  SynthModel make() const {
    uint64_t s = seed;
    if (!synth.empty()) {
      const SynthTriple st = parse_synth(synth);
      return synth_model(st.vocab, st.dim, st.seed,
                         static_cast<float>(bias));
    }
    if (!emb_path.empty()) {
      require_readable(emb_path, "embedding file");
      return synth_model_with_embeddings(load_embeddings(emb_path), s,
                                         static_cast<float>(bias));
    }
    return synth_model(vocab, dim, s, static_cast<float>(bias));
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf) {
  cmd->add_option("--vocab", mf.vocab, "vocabulary size");
  cmd->add_option("--dim", mf.dim, "embedding dimension");
  cmd->add_option("--seed", mf.seed, "model seed");
  cmd->add_option("--bias", mf.bias,
                  "frequency bias strength added to logits");
  cmd->add_option("--synth", mf.synth, "synthetic model as V,D,SEED");
  cmd->add_option("--emb", mf.emb_path, "embedding file (WTAEMB1)");
}

// Seed streams: the WTA permutations and the cuckoo tables get their own
// seeds derived from the model seed so one flag reproduces the whole run.
uint64_t wta_seed_of(uint64_t model_seed) { return mix_seed(model_seed, 1); }
uint64_t index_seed_of(uint64_t model_seed) { return mix_seed(model_seed, 2); }

json stage_json(const StageTimes& st) {
  return json{{"wta_hash", st.wta_hash},
              {"cuckoo_lookup", st.cuckoo_lookup},
              {"construct_candidate_list", st.construct_candidate_list},
              {"construct_e_lsh", st.construct_e_lsh},
              {"matrix_multiply", st.matrix_multiply},
              {"normalization", st.normalization},
              {"softmax_path_total", st.softmax_path()},
              {"beam_expansion", st.beam_expansion},
              {"recurrence", st.recurrence},
              {"oracle", st.oracle}};
}

void print_stage_table(const StageTimes& st, DecodeMode mode) {
  const double total = st.softmax_path();
  const auto row = [&](const char* name, double ms) {
    std::printf("  -- %-26s %10.2f ms %6.1f%%\n", name, ms,
                total > 0 ? 100.0 * ms / total : 0.0);
  };
  std::printf("  %-29s %10.2f ms  100.0%%\n", "Softmax path", total);
  if (mode == DecodeMode::kLsh) {
    row("WTA-hash", st.wta_hash);
    row("Cuckoo lookup", st.cuckoo_lookup);
  }
  if (mode != DecodeMode::kFull) {
    row("Construct candidate list", st.construct_candidate_list);
    row("Construct E_LSH", st.construct_e_lsh);
  }
  row("Matrix multiply", st.matrix_multiply);
  row("Normalization", st.normalization);
  std::printf("  %-29s %10.2f ms\n", "Beam expansion", st.beam_expansion);
  std::printf("  %-29s %10.2f ms\n", "Recurrence", st.recurrence);
}

json decode_report(const DecodeResult& res, const SynthModel& model,
                   const DecodeConfig& cfg, DecodeMode mode,
                   const std::optional<WtaParams>& params, bool oracle,
                   int workers, uint64_t model_seed) {
  json seqs = json::array();
  json scores = json::array();
  json finished = json::array();
  for (const auto& h : res.hypotheses) {
    seqs.push_back(h.tokens);
    scores.push_back(h.score);
    finished.push_back(h.finished);
  }
  json params_j{{"K", nullptr}, {"u", nullptr}, {"W", nullptr}};
  if (params) {
    params_j["K"] = params->K;
    params_j["u"] = params->u;
    params_j["W"] = params->W;
  }
  params_j["T"] = cfg.top_merge;
  params_j["t"] = cfg.threshold;
  params_j["seed"] = model_seed;
  params_j["bias"] = model.bias_strength;
  params_j["workers"] = workers;

  bool covers_vocab = true;
  for (uint32_t v : res.per_step_vlsh)
    covers_vocab = covers_vocab && v == model.vocab;

  return json{{"command", "decode"},
              {"mode", mode_name(mode)},
              {"vocab", model.vocab},
              {"dim", model.dim},
              {"beam", cfg.beam},
              {"steps_requested", cfg.max_len},
              {"steps_run", res.steps},
              {"params", params_j},
              {"full_vocabulary_equivalent", covers_vocab},
              {"mean_vlsh", res.mean_vlsh()},
              {"per_step_vlsh", res.per_step_vlsh},
              {"recall_at_b", oracle ? json(res.mean_recall()) : json()},
              {"per_step_recall",
               oracle ? json(res.per_step_recall) : json()},
              {"provenance",
               {{"threshold_survivors", res.threshold_survivors},
                {"top_added", res.top_added},
                {"specials_added", res.specials_added}}},
              {"sequences", seqs},
              {"scores", scores},
              {"finished", finished},
              {"stage_ms", stage_json(res.stages)}};
}

void emit_json(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("cannot open for write: " + out_path);
  f << j.dump(2) << "\n";
}

int cmd_build(const ModelFlags& mf, int K, int u, int W,
              const std::string& out_path, int workers) {
  if (workers > 0) omp_set_num_threads(workers);
  const SynthModel model = mf.make();
  const uint64_t model_seed = mf.synth.empty() ? mf.seed
                                               : parse_synth(mf.synth).seed;
  WtaParams params(K, u, W, wta_seed_of(model_seed));
  const LshIndex index =
      build_lsh_index(model.embeddings, params, index_seed_of(model_seed));
  save_lsh_index(index, out_path);

  const auto counts = index.bands.distinct_codes_per_band();
  std::printf("index: vocab=%u dim=%d K=%d u=%d W=%d -> %s\n",
              index.bands.vocab_size(), index.dim, K, u, W, out_path.c_str());
  std::printf("band distinct-code counts:");
  for (uint32_t c : counts) std::printf(" %u", c);
  std::printf("\nmax span length: %u\n", index.bands.max_span_length());
  return 0;
}

struct DecodeFlags {
  ModelFlags model;
  std::string index_path;
  std::string out_path;
  std::string mode_str = "full";
  int K = 8, u = 3, W = 100;
  int beam = 4;
  uint32_t top_merge = 0;
  int threshold = 1;
  int steps = 16;
  bool oracle = false;
  int workers = 0;
};

int cmd_decode(const DecodeFlags& df) {
  if (df.workers > 0) omp_set_num_threads(df.workers);
  const DecodeMode mode = parse_mode(df.mode_str);
  const SynthModel model = df.model.make();
  const uint64_t model_seed =
      df.model.synth.empty() ? df.model.seed : parse_synth(df.model.synth).seed;

  std::optional<LshIndex> index;
  std::optional<WtaParams> params;
  if (mode == DecodeMode::kLsh) {
    if (!df.index_path.empty()) {
      require_readable(df.index_path, "index file");
      index = load_lsh_index(df.index_path);
      if (index->bands.vocab_size() != model.vocab ||
          index->dim != model.dim)
        throw CLI::ValidationError("index shape does not match the model");
    } else {
      index = build_lsh_index(model.embeddings,
                              WtaParams(df.K, df.u, df.W,
                                        wta_seed_of(model_seed)),
                              index_seed_of(model_seed));
    }
    params = index->params;
  }

  DecodeConfig cfg;
  cfg.beam = df.beam;
  cfg.top_merge = df.top_merge;
  cfg.threshold = df.threshold;
  cfg.max_len = df.steps;

  const DecodeResult res =
      decode(model, cfg, mode, index ? &*index : nullptr, df.oracle);

  std::printf("mode %s  vocab %u  dim %d  beam %d  steps %d/%d\n",
              mode_name(mode), model.vocab, model.dim, cfg.beam, res.steps,
              cfg.max_len);
  print_stage_table(res.stages, mode);
  std::printf("  mean |V_LSH| %.1f (%.2fx reduction)\n", res.mean_vlsh(),
              res.mean_vlsh() > 0 ? model.vocab / res.mean_vlsh() : 0.0);
  if (mode != DecodeMode::kFull) {
    bool covers = true;
    for (uint32_t v : res.per_step_vlsh) covers = covers && v == model.vocab;
    if (covers)
      std::printf(
          "  note: candidate set covered the full vocabulary every step; "
          "output matches full mode\n");
  }
  if (df.oracle)
    std::printf("  recall@%d %.4f\n", cfg.beam, res.mean_recall());
  if (!res.hypotheses.empty()) {
    std::printf("  best hypothesis (score %.4f):", res.hypotheses[0].score);
    const auto& toks = res.hypotheses[0].tokens;
    for (size_t i = 0; i < toks.size() && i < 16; ++i)
      std::printf(" %u", toks[i]);
    if (toks.size() > 16) std::printf(" ...");
    std::printf("\n");
  }

  emit_json(decode_report(res, model, cfg, mode, params, df.oracle,
                          df.workers, model_seed),
            df.out_path);
  return 0;
}

struct GridFlags {
  ModelFlags model;
  std::vector<int> K{8};
  std::vector<int> u{3};
  std::vector<int> W{500};
  std::vector<uint32_t> T{0};
  std::vector<int> t{1};
  int beam = 12;
  int steps = 16;
  int workers = 0;
  std::string out_path;
};

int cmd_grid(const GridFlags& gf) {
  if (gf.workers > 0) omp_set_num_threads(gf.workers);
  if (gf.K.empty() || gf.u.empty() || gf.W.empty() || gf.T.empty() ||
      gf.t.empty())
    throw CLI::ValidationError("empty grid");
  const SynthModel model = gf.model.make();
  const uint64_t model_seed =
      gf.model.synth.empty() ? gf.model.seed : parse_synth(gf.model.synth).seed;

  std::string csv = "K,u,W,T,t,B,mean_vlsh,recall_at_b,softmax_ms,speedup\n";
  char line[256];

  // Full-softmax baseline, one measurement per invocation.
  DecodeConfig base_cfg;
  base_cfg.beam = gf.beam;
  base_cfg.max_len = gf.steps;
  base_cfg.threshold = 0;
  const DecodeResult baseline =
      decode(model, base_cfg, DecodeMode::kFull, nullptr, false);
  const double base_ms = baseline.stages.softmax_path();
  std::snprintf(line, sizeof(line), ",,,,,%d,%.1f,%.6f,%.3f,%.4f\n", gf.beam,
                static_cast<double>(model.vocab), 1.0, base_ms, 1.0);
  csv += line;

  for (int K : gf.K) {
    for (int u : gf.u) {
      for (int W : gf.W) {
        const LshIndex index =
            build_lsh_index(model.embeddings,
                            WtaParams(K, u, W, wta_seed_of(model_seed)),
                            index_seed_of(model_seed));
        for (uint32_t T : gf.T) {
          for (int t : gf.t) {
            DecodeConfig cfg;
            cfg.beam = gf.beam;
            cfg.top_merge = T;
            cfg.threshold = t;
            cfg.max_len = gf.steps;
            const DecodeResult res =
                decode(model, cfg, DecodeMode::kLsh, &index, true);
            const double ms = res.stages.softmax_path();
            std::snprintf(line, sizeof(line),
                          "%d,%d,%d,%u,%d,%d,%.1f,%.6f,%.3f,%.4f\n", K, u, W,
                          T, t, gf.beam, res.mean_vlsh(), res.mean_recall(),
                          ms, ms > 0 ? base_ms / ms : 0.0);
            csv += line;
            std::fprintf(stderr,
                         "grid K=%d u=%d W=%d T=%u t=%d: |V_LSH|=%.0f "
                         "recall=%.4f speedup=%.2f\n",
                         K, u, W, T, t, res.mean_vlsh(), res.mean_recall(),
                         ms > 0 ? base_ms / ms : 0.0);
          }
        }
      }
    }
  }

  if (gf.out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(gf.out_path);
    if (!f) throw std::runtime_error("cannot open for write: " + gf.out_path);
    f << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSH-accelerated beam search benchmark"};
  app.require_subcommand(1);

  // build
  auto* build = app.add_subcommand("build", "hash a vocabulary into an index");
  ModelFlags build_model;
  int bK = 8, bu = 3, bW = 100, build_workers = 0;
  std::string build_out = "index.wtaidx";
  add_model_flags(build, build_model);
  build->add_option("--K", bK, "WTA window size");
  build->add_option("--u", bu, "hashes per band");
  build->add_option("--W", bW, "band count");
  build->add_option("--workers", build_workers, "worker threads (0 = default)");
  build->add_option("--out", build_out, "output index path");

  // decode
  auto* dec = app.add_subcommand("decode", "run one beam decode");
  DecodeFlags df;
  add_model_flags(dec, df.model);
  dec->add_option("--index", df.index_path, "index file (WTAIDX1)");
  dec->add_option("--K", df.K, "WTA window size (in-memory index)");
  dec->add_option("--u", df.u, "hashes per band");
  dec->add_option("--W", df.W, "band count");
  dec->add_option("--beam", df.beam, "beam size");
  dec->add_option("--T", df.top_merge, "top frequent words merged in");
  dec->add_option("--t", df.threshold, "hit threshold");
  dec->add_option("--steps", df.steps, "maximum steps");
  dec->add_option("--mode", df.mode_str, "full | lsh | top");
  dec->add_flag("--oracle", df.oracle, "measure recall against exact top-B");
  dec->add_option("--workers", df.workers, "worker threads (0 = default)");
  dec->add_option("--out", df.out_path, "JSON report path (default stdout)");

  // grid
  auto* grid = app.add_subcommand("grid", "hyperparameter sweep to CSV");
  GridFlags gf;
  add_model_flags(grid, gf.model);
  grid->add_option("--K", gf.K, "window sizes")->delimiter(',');
  grid->add_option("--u", gf.u, "hashes per band")->delimiter(',');
  grid->add_option("--W", gf.W, "band counts")->delimiter(',');
  grid->add_option("--T", gf.T, "top-merge counts")->delimiter(',');
  grid->add_option("--t", gf.t, "hit thresholds")->delimiter(',');
  grid->add_option("--beam", gf.beam, "beam size");
  grid->add_option("--steps", gf.steps, "maximum steps");
  grid->add_option("--workers", gf.workers, "worker threads");
  grid->add_option("--out", gf.out_path, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
    if (build->parsed())
      return cmd_build(build_model, bK, bu, bW, build_out, build_workers);
    if (dec->parsed()) return cmd_decode(df);
    if (grid->parsed()) return cmd_grid(gf);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
