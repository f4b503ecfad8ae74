#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsgzsl/attributes.hpp"
#include "tsgzsl/dataset.hpp"
#include "tsgzsl/embedder.hpp"
#include "tsgzsl/metrics.hpp"
#include "tsgzsl/model.hpp"

namespace tsgzsl::pipeline {

/// Flat run configuration with defaults for every field. Unknown keys in a
/// config file are rejected. The fully resolved config is written next to
/// the run outputs.
struct RunConfig {
  std::string data;        // dataset file, or directory holding *_TRAIN*/*_TEST* files
  std::string data_test;   // optional second file pooled with `data`
  std::string out = "out";
  std::uint64_t seed = 7;
  std::string mode = "full";
  bool normalize = true;
  double tau = 1.0;
  bool gamma_sweep = true;   // select gamma on validation by maximizing H
  double gamma = 0.0;        // used when gamma_sweep is false
  std::size_t apen_m = 2;
  double apen_r_factor = 0.2;
  bool dump_attributes = false;
  std::size_t trials = 0;    // random-search budget for `search`/`pipeline`

  encoder::EncoderConfig enc;
  model::LatentConfig lat;

  static RunConfig from_json_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);
  std::string to_json() const;
};

/// Discrete per-hyperparameter choice sets for the seeded random search;
/// the objective is validation AUSUC.
struct SearchSpace {
  std::vector<std::size_t> repr_dim = {8, 16};
  std::vector<std::size_t> hidden_dim = {16, 32};
  std::vector<std::size_t> enc_blocks = {1, 2};
  std::vector<std::size_t> enc_kernel = {3};
  std::vector<std::size_t> lat_blocks = {1};
  std::vector<std::size_t> lat_filters = {8, 16};
  std::vector<std::size_t> lat_kernel = {3, 5};
  std::vector<std::size_t> lat_pool = {2};
  std::vector<std::size_t> latent_dim = {8, 16, 32};
  std::vector<std::size_t> clf_hidden = {16, 32};
  std::vector<double> tau = {0.5, 1.0, 2.0};

  static SearchSpace from_json_file(const std::string& path);
  void validate() const;  // every choice list nonempty
  RunConfig sample(const RunConfig& base, core::Rng& rng) const;
};

void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Loads `cfg.data` (file or directory with TRAIN/TEST parts), pooling with
/// `cfg.data_test` when given.
data::Dataset load_dataset(const RunConfig& cfg);

/// Synthetic 4-class waveform set (sine / square / sawtooth / noise) with
/// randomized phase and frequency; used by the demo command and tests.
data::Dataset make_waveforms(std::size_t n, std::size_t t_len, core::Rng& rng);
std::string dataset_to_tsv(const data::Dataset& ds);

struct StageModels {
  model::GZSLModel classifier;
  std::optional<encoder::EmbedderModel> embedder;  // absent in no_embedder mode
  encoder::TrainCurve enc_curve;
  model::TrainCurve clf_curve;
};

struct ValidationOutcome {
  double gamma_star = 0.0;
  double best_h = 0.0;
  double val_ausuc = 0.0;
  metrics::SUCurve curve;
};

/// Trains embedder + classifier on the given training indices with the
/// given class layout (seen ids first).
StageModels train_stage(const data::Dataset& ds, const RunConfig& cfg,
                        const std::vector<std::size_t>& train_idx, std::vector<int> seen_classes,
                        std::vector<int> unseen_classes, core::Rng enc_rng, core::Rng clf_rng);

/// Probability rows (model class-slot order) for the given samples.
std::vector<std::vector<double>> probabilities(const data::Dataset& ds, const StageModels& stage,
                                               const std::vector<std::size_t>& idx,
                                               const RunConfig& cfg);

/// Sweeps gamma on the given evaluation indices and picks the H-maximizing
/// point (first grid point on ties).
ValidationOutcome select_gamma(const data::Dataset& ds, const StageModels& stage,
                               const std::vector<std::size_t>& eval_idx, const RunConfig& cfg);

// ---- commands ----

/// Writes <out>/split.json; returns the manifest path.
std::string cmd_split(const RunConfig& cfg);

/// Two-stage protocol: stage 1 trains on the inner split and selects gamma
/// (and, via cmd_search, the architecture) on validation; stage 2 retrains
/// on train + seen/unseen validation samples and serializes the artifacts.
void cmd_train(const RunConfig& cfg);

/// Evaluates saved artifacts on the seen/unseen test sets: report JSON,
/// sweep CSV and SVG.
metrics::EvalReport cmd_eval(const RunConfig& cfg);

/// Seeded random search over the space; logs every trial and writes the
/// best configuration (by validation AUSUC) to <out>/best_config.json.
RunConfig cmd_search(const RunConfig& cfg, const SearchSpace& space);

/// split -> (search when trials >= 1) -> train -> eval.
metrics::EvalReport cmd_pipeline(const RunConfig& cfg, const SearchSpace& space);

}  // namespace tsgzsl::pipeline
