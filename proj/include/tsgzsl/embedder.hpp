#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tsgzsl/adam.hpp"
#include "tsgzsl/rng.hpp"
#include "tsgzsl/serialize.hpp"
#include "tsgzsl/tensor.hpp"

namespace tsgzsl::encoder {

struct EncoderConfig {
  std::size_t repr_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t num_residual_blocks = 2;
  std::size_t kernel_size = 3;
  double mask_probability = 0.5;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  bool hierarchical_levels = true;
  double learning_rate = 1e-3;

  void validate() const;
};

/// Two overlapping windows [a1,b1) and [a2,b2) with a1 <= a2 < b1 <= b2;
/// the overlap is [a2,b1) and is never empty.
struct CropPair {
  std::size_t a1 = 0, b1 = 0, a2 = 0, b2 = 0;
  std::size_t overlap_begin() const { return a2; }
  std::size_t overlap_end() const { return b1; }
  std::size_t overlap_len() const { return b1 - a2; }
};

/// Samples a crop pair uniformly over all valid (a1,a2,b1,b2) configurations.
CropPair random_crop(std::size_t t_len, core::Rng& rng);

/// Input projection + timestamp masking + dilated residual convolution
/// stack; block b runs at dilation 2^b. Same padding throughout, so the
/// per-timestamp output is aligned with the input timestamps.
class EmbedderModel {
public:
  EncoderConfig config;

  core::TensorPtr proj_w, proj_b;  // (1,hidden), (hidden)
  struct Block {
    core::TensorPtr w1, b1, w2, b2;  // (hidden,hidden,K) convs
    std::size_t dilation = 1;
  };
  std::vector<Block> blocks;
  core::TensorPtr head_w, head_b;  // 1x1 conv: (repr,hidden,1), (repr)

  static EmbedderModel init(const EncoderConfig& cfg, core::Rng& rng);

  /// batch: (B,T) -> per-timestamp representations (B,T,repr_dim).
  /// With mask=true each timestamp's projected latent is zeroed
  /// independently with mask_probability (training-time augmentation).
  core::TensorPtr encode(core::Tape& tape, const core::TensorPtr& batch, bool mask,
                         core::Rng* rng) const;

  core::NamedTensors named_params() const;
  std::vector<core::TensorPtr> params() const;
};

/// Temporal contrastive loss over aligned overlap representations h, h' of
/// shape (B,L,C): candidates for anchor (i,t) are the cross-crop
/// similarities at every overlap timestamp plus the within-crop
/// similarities at t' != t. Mean over i and t. Throws when L == 0 upstream
/// (slices of length 0 cannot be built).
core::TensorPtr temporal_loss(core::Tape& tape, const core::TensorPtr& h1, const core::TensorPtr& h2);

/// Instance-wise contrastive loss: candidates for anchor (i,t) are the
/// cross-crop similarities with every batch instance at t plus within-crop
/// similarities with the other instances. Mean over i and t.
core::TensorPtr instance_loss(core::Tape& tape, const core::TensorPtr& h1, const core::TensorPtr& h2);

/// Sum of the two losses; with hierarchical=true both are recomputed after
/// successive window-2 max-pools until the time axis reaches length 1 and
/// the per-level sums are averaged.
core::TensorPtr total_loss(core::Tape& tape, const core::TensorPtr& h1, const core::TensorPtr& h2,
                           bool hierarchical);

struct TrainCurve {
  std::vector<double> epoch_loss;
  std::string to_csv() const;  // "epoch,loss"
};

/// Trains the encoder on the given series (one shared crop pair per batch so
/// instance-wise positives stay aligned). Deterministic for a fixed rng seed.
EmbedderModel train_embedder(const std::vector<std::vector<double>>& series,
                             const EncoderConfig& cfg, core::Rng& rng,
                             TrainCurve* curve = nullptr);

/// Instance-level embedding: encode the full series (no crop, no mask) and
/// max-pool the per-timestamp representations over time.
std::vector<double> embed_series(const EmbedderModel& model, const std::vector<double>& series);

std::vector<std::vector<double>> embed_all(const EmbedderModel& model,
                                           const std::vector<std::vector<double>>& series);

}  // namespace tsgzsl::encoder
