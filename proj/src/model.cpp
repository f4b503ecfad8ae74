#include "tsgzsl/model.hpp"

#include "tsgzsl/adam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace tsgzsl::model {

using core::Tape;
using core::Tensor;
using core::TensorPtr;

Mode parse_mode(const std::string& name) {
  if (name == "full") return Mode::Full;
  if (name == "no_embedder") return Mode::NoEmbedder;
  if (name == "no_attributes") return Mode::NoAttributes;
  throw std::invalid_argument("unknown mode '" + name + "' (expected full, no_embedder or no_attributes)");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::Full: return "full";
    case Mode::NoEmbedder: return "no_embedder";
    case Mode::NoAttributes: return "no_attributes";
  }
  throw std::logic_error("mode_name: invalid mode");
}

void LatentConfig::validate(std::size_t input_dim) const {
  if (latent_dim < 1) throw std::invalid_argument("LatentConfig: latent_dim must be >= 1");
  if (num_conv_blocks < 1) throw std::invalid_argument("LatentConfig: num_conv_blocks must be >= 1");
  if (filters.size() != num_conv_blocks || kernels.size() != num_conv_blocks) {
    throw std::invalid_argument("LatentConfig: filters/kernels must list one entry per conv block");
  }
  if (pool_size < 1) throw std::invalid_argument("LatentConfig: pool_size must be >= 1");
  std::size_t len = input_dim;
  for (std::size_t b = 0; b < num_conv_blocks; ++b) {
    if (filters[b] < 1 || kernels[b] < 1) {
      throw std::invalid_argument("LatentConfig: filters and kernels must be >= 1");
    }
    if (len < pool_size) {
      throw std::invalid_argument("LatentConfig: pooling exhausts the input (length " +
                                  std::to_string(len) + " before block " + std::to_string(b) + ")");
    }
    len = (len - pool_size) / pool_size + 1;
  }
}

void Standardizer::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("Standardizer::fit: no rows");
  const std::size_t k = rows[0].size();
  mean.assign(k, 0.0);
  stddev.assign(k, 0.0);
  for (const auto& r : rows) {
    if (r.size() != k) throw std::invalid_argument("Standardizer::fit: ragged rows");
    for (std::size_t i = 0; i < k; ++i) mean[i] += r[i];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < k; ++i) {
      const double d = r[i] - mean[i];
      stddev[i] += d * d;
    }
  }
  for (double& s : stddev) s = std::sqrt(s / static_cast<double>(rows.size()));
  fitted_ = true;
}

void Standardizer::restore(std::vector<double> mean_in, std::vector<double> stddev_in) {
  if (mean_in.size() != stddev_in.size() || mean_in.empty()) {
    throw std::invalid_argument("Standardizer::restore: mean/std size mismatch");
  }
  mean = std::move(mean_in);
  stddev = std::move(stddev_in);
  fitted_ = true;
}

std::vector<double> Standardizer::apply(const std::vector<double>& row) const {
  if (!fitted_) throw std::runtime_error("Standardizer: apply() before fit()");
  if (row.size() != mean.size()) {
    throw std::invalid_argument("Standardizer: row has " + std::to_string(row.size()) +
                                " features, fitted on " + std::to_string(mean.size()));
  }
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    out[i] = stddev[i] > 1e-12 ? (row[i] - mean[i]) / stddev[i] : 0.0;
  }
  return out;
}

GZSLModel GZSLModel::init(const LatentConfig& cfg, Mode mode, double tau,
                          std::vector<int> class_order, std::size_t num_seen, std::size_t input_dim,
                          core::Rng& rng) {
  cfg.validate(input_dim);
  if (tau <= 0.0) throw std::invalid_argument("GZSLModel: temperature must be > 0");
  if (num_seen == 0 || num_seen > class_order.size()) {
    throw std::invalid_argument("GZSLModel: invalid seen-class count");
  }
  GZSLModel m;
  m.config = cfg;
  m.mode = mode;
  m.tau = tau;
  m.class_order = std::move(class_order);
  m.num_seen = num_seen;
  m.input_dim = input_dim;

  auto u = [&rng](core::Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng, /*requires_grad=*/true);
  };

  std::size_t len = input_dim, channels = 1;
  for (std::size_t b = 0; b < cfg.num_conv_blocks; ++b) {
    ConvBlock blk;
    blk.w = u({cfg.filters[b], channels, cfg.kernels[b]}, channels * cfg.kernels[b]);
    blk.b = u({cfg.filters[b]}, channels * cfg.kernels[b]);
    m.lat_blocks.push_back(std::move(blk));
    channels = cfg.filters[b];
    len = (len - cfg.pool_size) / cfg.pool_size + 1;
  }
  const std::size_t flat = len * channels;
  m.lat_fc_w = u({flat, cfg.latent_dim}, flat);
  m.lat_fc_b = u({cfg.latent_dim}, flat);

  std::size_t in = cfg.latent_dim;
  for (std::size_t h : cfg.clf_hidden) {
    m.clf_layers.emplace_back(u({in, h}, in), u({h}, in));
    in = h;
  }
  m.clf_layers.emplace_back(u({in, m.class_order.size()}, in), u({m.class_order.size()}, in));
  return m;
}

std::vector<double> GZSLModel::fuse(const std::vector<double>& h,
                                    const std::vector<double>& attrs) const {
  if (!attr_std.fitted()) {
    throw std::runtime_error("fuse: attribute standardizer has not been fitted");
  }
  std::vector<double> q = h;
  const auto sa = attr_std.apply(attrs);
  q.insert(q.end(), sa.begin(), sa.end());
  return q;
}

TensorPtr GZSLModel::latent_embed(Tape& tape, const TensorPtr& q_batch) const {
  if (!q_batch || q_batch->rank() != 2 || q_batch->shape[1] != input_dim) {
    throw std::invalid_argument("latent_embed: expected (B," + std::to_string(input_dim) + "), got " +
                                (q_batch ? core::shape_str(q_batch->shape) : std::string("null")));
  }
  const std::size_t B = q_batch->shape[0];
  auto x = core::reshape(tape, q_batch, {B, input_dim, 1});
  for (const ConvBlock& blk : lat_blocks) {
    x = core::conv1d(tape, x, blk.w, blk.b, 1, /*same_padding=*/true);
    x = core::relu(tape, x);
    x = core::maxpool_time(tape, x, config.pool_size, config.pool_size);
  }
  auto flat = core::reshape(tape, x, {B, x->shape[1] * x->shape[2]});
  return core::add(tape, core::matmul(tape, flat, lat_fc_w), lat_fc_b);
}

TensorPtr GZSLModel::logits(Tape& tape, const TensorPtr& q_batch) const {
  auto z = latent_embed(tape, q_batch);
  for (std::size_t i = 0; i < clf_layers.size(); ++i) {
    z = core::add(tape, core::matmul(tape, z, clf_layers[i].first), clf_layers[i].second);
    if (i + 1 < clf_layers.size()) z = core::relu(tape, z);
  }
  return z;
}

std::vector<double> softmax_with_temperature(const std::vector<double>& logits, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("softmax: temperature must be > 0, got " + std::to_string(tau));
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  double m = logits[0] / tau;
  for (double r : logits) m = std::max(m, r / tau);
  double denom = 0.0;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] / tau - m);
    denom += out[i];
  }
  for (double& p : out) p /= denom;
  return out;
}

std::vector<double> GZSLModel::class_probs(const std::vector<double>& q) const {
  Tape tape;
  core::NoGradGuard guard(tape);
  auto qb = Tensor::create({1, q.size()}, q);
  auto r = logits(tape, qb);
  return softmax_with_temperature(r->values, tau);
}

int GZSLModel::predict(const std::vector<double>& probs, double gamma) const {
  if (probs.size() != class_order.size()) {
    throw std::invalid_argument("predict: " + std::to_string(probs.size()) + " probabilities for " +
                                std::to_string(class_order.size()) + " classes");
  }
  int best_class = class_order[0];
  double best_score = probs[0] - (0 < num_seen ? gamma : 0.0);
  for (std::size_t k = 1; k < probs.size(); ++k) {
    const double score = probs[k] - (k < num_seen ? gamma : 0.0);
    if (score > best_score || (score == best_score && class_order[k] < best_class)) {
      best_score = score;
      best_class = class_order[k];
    }
  }
  return best_class;
}

int GZSLModel::slot_of(int class_id) const {
  for (std::size_t k = 0; k < class_order.size(); ++k) {
    if (class_order[k] == class_id) return static_cast<int>(k);
  }
  return -1;
}

core::NamedTensors GZSLModel::named_params() const {
  core::NamedTensors out;
  auto put = [&out](const std::string& n, const TensorPtr& t) {
    t->name = n;
    out.emplace_back(n, t);
  };
  for (std::size_t i = 0; i < lat_blocks.size(); ++i) {
    put("lat.block" + std::to_string(i) + ".w", lat_blocks[i].w);
    put("lat.block" + std::to_string(i) + ".b", lat_blocks[i].b);
  }
  put("lat.fc.w", lat_fc_w);
  put("lat.fc.b", lat_fc_b);
  for (std::size_t i = 0; i < clf_layers.size(); ++i) {
    put("clf.layer" + std::to_string(i) + ".w", clf_layers[i].first);
    put("clf.layer" + std::to_string(i) + ".b", clf_layers[i].second);
  }
  return out;
}

std::vector<TensorPtr> GZSLModel::params() const {
  std::vector<TensorPtr> out;
  for (auto& [n, t] : named_params()) out.push_back(t);
  return out;
}

std::vector<double> build_input(Mode mode, const GZSLModel& model, const std::vector<double>& embedding,
                                const std::vector<double>& raw_series, const std::vector<double>& attrs) {
  switch (mode) {
    case Mode::Full:
      return model.fuse(embedding, attrs);
    case Mode::NoEmbedder:
      return model.fuse(raw_series, attrs);
    case Mode::NoAttributes:
      return embedding;
  }
  throw std::logic_error("build_input: invalid mode");
}

std::string TrainCurve::to_csv() const {
  std::string out = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e + 1, epoch_loss[e]);
    out += buf;
  }
  return out;
}

void train_gzsl(GZSLModel& model, const std::vector<std::vector<double>>& inputs,
                const std::vector<int>& labels, core::Rng& rng, TrainCurve* curve) {
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw std::invalid_argument("train_gzsl: inputs and labels must be nonempty and aligned");
  }
  std::vector<std::size_t> slots(inputs.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int slot = model.slot_of(labels[i]);
    if (slot < 0 || static_cast<std::size_t>(slot) >= model.num_seen) {
      throw std::invalid_argument("train_gzsl: label " + std::to_string(labels[i]) +
                                  " is not a seen class");
    }
    slots[i] = static_cast<std::size_t>(slot);
  }

  core::Adam opt(model.params(), model.config.learning_rate);
  const std::size_t classes = model.num_classes();

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);

  Tape tape;
  for (std::size_t epoch = 0; epoch < model.config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    std::size_t seen_samples = 0;
    for (std::size_t start = 0; start < order.size(); start += model.config.batch_size) {
      const std::size_t bsz = std::min(model.config.batch_size, order.size() - start);
      std::vector<double> qv;
      qv.reserve(bsz * model.input_dim);
      std::vector<double> onehot(bsz * classes, 0.0);
      for (std::size_t k = 0; k < bsz; ++k) {
        const auto& q = inputs[order[start + k]];
        if (q.size() != model.input_dim) {
          throw std::invalid_argument("train_gzsl: input " + std::to_string(order[start + k]) +
                                      " has dimension " + std::to_string(q.size()) + ", expected " +
                                      std::to_string(model.input_dim));
        }
        qv.insert(qv.end(), q.begin(), q.end());
        onehot[k * classes + slots[order[start + k]]] = 1.0;
      }
      auto qb = Tensor::create({bsz, model.input_dim}, std::move(qv));
      auto r = model.logits(tape, qb);                                     // (B,classes)
      auto scaled = core::scale(tape, r, 1.0 / model.tau);
      auto lse = core::logsumexp_rows(tape, scaled);                       // (B,1)
      auto picked = core::reduce_sum(
          tape, core::mul(tape, scaled, Tensor::create({bsz, classes}, std::move(onehot))), 1,
          /*keepdim=*/true);                                               // (B,1)
      auto loss = core::reduce_mean_all(tape, core::sub(tape, lse, picked));

      const double lv = loss->item();
      if (!std::isfinite(lv)) {
        throw std::runtime_error("train_gzsl: loss became non-finite at epoch " +
                                 std::to_string(epoch + 1));
      }
      epoch_sum += lv * static_cast<double>(bsz);
      seen_samples += bsz;
      tape.backward(loss);
      opt.step();
      tape.clear();
    }
    if (curve) curve->epoch_loss.push_back(epoch_sum / static_cast<double>(seen_samples));
  }
}

std::string GZSLModel::sidecar_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(mode);
  j["tau"] = tau;
  j["gamma"] = gamma;
  j["class_order"] = class_order;
  j["num_seen"] = num_seen;
  j["input_dim"] = input_dim;
  j["attr_mean"] = attr_std.fitted() ? attr_std.mean : std::vector<double>{};
  j["attr_std"] = attr_std.fitted() ? attr_std.stddev : std::vector<double>{};
  j["num_conv_blocks"] = config.num_conv_blocks;
  j["filters"] = config.filters;
  j["kernels"] = config.kernels;
  j["pool_size"] = config.pool_size;
  j["latent_dim"] = config.latent_dim;
  j["clf_hidden"] = config.clf_hidden;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["learning_rate"] = config.learning_rate;
  return j.dump(2) + "\n";
}

GZSLModel GZSLModel::from_sidecar_json(const std::string& text, core::Rng& rng) {
  const auto j = nlohmann::json::parse(text);
  LatentConfig cfg;
  cfg.num_conv_blocks = j.at("num_conv_blocks").get<std::size_t>();
  cfg.filters = j.at("filters").get<std::vector<std::size_t>>();
  cfg.kernels = j.at("kernels").get<std::vector<std::size_t>>();
  cfg.pool_size = j.at("pool_size").get<std::size_t>();
  cfg.latent_dim = j.at("latent_dim").get<std::size_t>();
  cfg.clf_hidden = j.at("clf_hidden").get<std::vector<std::size_t>>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.learning_rate = j.at("learning_rate").get<double>();

  GZSLModel m = init(cfg, parse_mode(j.at("mode").get<std::string>()), j.at("tau").get<double>(),
                     j.at("class_order").get<std::vector<int>>(), j.at("num_seen").get<std::size_t>(),
                     j.at("input_dim").get<std::size_t>(), rng);
  m.gamma = j.at("gamma").get<double>();
  auto mean = j.at("attr_mean").get<std::vector<double>>();
  auto sd = j.at("attr_std").get<std::vector<double>>();
  if (!mean.empty()) m.attr_std.restore(std::move(mean), std::move(sd));
  return m;
}

}  // namespace tsgzsl::model
