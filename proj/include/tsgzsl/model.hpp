#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tsgzsl/rng.hpp"
#include "tsgzsl/serialize.hpp"
#include "tsgzsl/tensor.hpp"

namespace tsgzsl::model {

enum class Mode { Full, NoEmbedder, NoAttributes };

Mode parse_mode(const std::string& name);  // throws on unknown mode strings
std::string mode_name(Mode mode);

struct LatentConfig {
  std::size_t num_conv_blocks = 1;
  std::vector<std::size_t> filters = {8};   // one entry per block
  std::vector<std::size_t> kernels = {3};   // one entry per block
  std::size_t pool_size = 2;
  std::size_t latent_dim = 16;
  std::vector<std::size_t> clf_hidden = {32};
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;

  void validate(std::size_t input_dim) const;
};

struct CalibrationParams {
  double tau = 1.0;   // temperature, > 0
  double gamma = 0.0; // calibration factor, swept over [-1,1]
};

/// Per-feature z-scoring with statistics taken from training data only.
/// Features with (near) zero training variance standardize to 0.
class Standardizer {
public:
  void fit(const std::vector<std::vector<double>>& rows);
  void restore(std::vector<double> mean_in, std::vector<double> stddev_in);
  std::vector<double> apply(const std::vector<double>& row) const;
  bool fitted() const { return fitted_; }

  std::vector<double> mean, stddev;

private:
  bool fitted_ = false;
};

/// Latent module (conv blocks -> flatten -> fully connected to latent_dim)
/// plus the classifier head emitting one logit per class, seen classes
/// first. Probabilities are softmax(r/tau) over all classes; prediction
/// subtracts gamma from every seen-class probability before the argmax.
class GZSLModel {
public:
  LatentConfig config;
  Mode mode = Mode::Full;
  double tau = 1.0;
  double gamma = 0.0;
  std::vector<int> class_order;  // dataset class ids, seen block first
  std::size_t num_seen = 0;
  std::size_t input_dim = 0;
  Standardizer attr_std;

  struct ConvBlock {
    core::TensorPtr w, b;
  };
  std::vector<ConvBlock> lat_blocks;
  core::TensorPtr lat_fc_w, lat_fc_b;
  std::vector<std::pair<core::TensorPtr, core::TensorPtr>> clf_layers;  // last layer emits logits

  static GZSLModel init(const LatentConfig& cfg, Mode mode, double tau,
                        std::vector<int> class_order, std::size_t num_seen, std::size_t input_dim,
                        core::Rng& rng);

  /// q_i = h_i concatenated with the standardized attribute vector.
  std::vector<double> fuse(const std::vector<double>& h, const std::vector<double>& attrs) const;

  /// (B,input_dim) -> (B,latent_dim)
  core::TensorPtr latent_embed(core::Tape& tape, const core::TensorPtr& q_batch) const;
  /// (B,input_dim) -> (B,num_classes) raw logits
  core::TensorPtr logits(core::Tape& tape, const core::TensorPtr& q_batch) const;

  /// Inference-path probabilities for one fused input.
  std::vector<double> class_probs(const std::vector<double>& q) const;

  /// Calibrated-stacking argmax; returns a dataset class id, ties broken by
  /// the lowest class id.
  int predict(const std::vector<double>& probs, double gamma) const;

  std::size_t num_classes() const { return class_order.size(); }
  /// Slot of a dataset class id in the logit vector; -1 when absent.
  int slot_of(int class_id) const;

  core::NamedTensors named_params() const;
  std::vector<core::TensorPtr> params() const;

  std::string sidecar_json() const;
  static GZSLModel from_sidecar_json(const std::string& text, core::Rng& rng);
};

/// Temperature softmax over a logit vector (stable log-sum-exp form).
std::vector<double> softmax_with_temperature(const std::vector<double>& logits, double tau);

/// Builds the classifier input for the configured mode:
///   full -> embedding (+) standardized attributes
///   no_embedder -> raw series (+) standardized attributes
///   no_attributes -> embedding only
std::vector<double> build_input(Mode mode, const GZSLModel& model, const std::vector<double>& embedding,
                                const std::vector<double>& raw_series, const std::vector<double>& attrs);

struct TrainCurve {
  std::vector<double> epoch_loss;
  std::string to_csv() const;
};

/// Cross-entropy training of L and C on fused inputs whose labels must all
/// be seen classes. The embedder is not involved here (frozen by
/// construction: inputs are precomputed).
void train_gzsl(GZSLModel& model, const std::vector<std::vector<double>>& inputs,
                const std::vector<int>& labels, core::Rng& rng, TrainCurve* curve = nullptr);

}  // namespace tsgzsl::model
