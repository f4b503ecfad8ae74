#include "tsgzsl/embedder.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace tsgzsl::encoder {

using core::Tape;
using core::Tensor;
using core::TensorPtr;

void EncoderConfig::validate() const {
  if (repr_dim < 1) throw std::invalid_argument("EncoderConfig: repr_dim must be >= 1");
  if (hidden_dim < 1) throw std::invalid_argument("EncoderConfig: hidden_dim must be >= 1");
  if (kernel_size < 1) throw std::invalid_argument("EncoderConfig: kernel_size must be >= 1");
  if (batch_size < 2) {
    throw std::invalid_argument("EncoderConfig: batch_size must be >= 2 (instance loss needs negatives)");
  }
  if (mask_probability < 0.0 || mask_probability > 1.0) {
    throw std::invalid_argument("EncoderConfig: mask_probability must be in [0,1]");
  }
}

CropPair random_crop(std::size_t t_len, core::Rng& rng) {
  if (t_len < 2) {
    throw std::invalid_argument("random_crop: series length must be >= 2, got " + std::to_string(t_len));
  }
  // Valid configurations satisfy 0 <= a1 <= a2 < b1 <= b2 <= T. Drawing
  // (a2,b1) with weight (a2+1)*(T-b1+1) and then a1, b2 uniformly in their
  // ranges makes every quadruple equally likely.
  const std::size_t T = t_len;
  std::vector<double> cumulative;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total = 0.0;
  for (std::size_t a2 = 0; a2 < T; ++a2) {
    for (std::size_t b1 = a2 + 1; b1 <= T; ++b1) {
      total += static_cast<double>((a2 + 1) * (T - b1 + 1));
      pairs.emplace_back(a2, b1);
      cumulative.push_back(total);
    }
  }
  const double u = rng.uniform01() * total;
  std::size_t lo = 0, hi = cumulative.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (cumulative[mid] > u) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  CropPair cp;
  cp.a2 = pairs[lo].first;
  cp.b1 = pairs[lo].second;
  cp.a1 = static_cast<std::size_t>(rng.uniform_int(cp.a2 + 1));
  cp.b2 = cp.b1 + static_cast<std::size_t>(rng.uniform_int(T - cp.b1 + 1));
  return cp;
}

EmbedderModel EmbedderModel::init(const EncoderConfig& cfg, core::Rng& rng) {
  cfg.validate();
  EmbedderModel m;
  m.config = cfg;
  const std::size_t H = cfg.hidden_dim, K = cfg.kernel_size, R = cfg.repr_dim;
  auto u = [&](core::Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng, /*requires_grad=*/true);
  };
  m.proj_w = u({1, H}, 1);
  m.proj_b = u({H}, 1);
  for (std::size_t b = 0; b < cfg.num_residual_blocks; ++b) {
    Block blk;
    blk.dilation = std::size_t{1} << b;
    blk.w1 = u({H, H, K}, H * K);
    blk.b1 = u({H}, H * K);
    blk.w2 = u({H, H, K}, H * K);
    blk.b2 = u({H}, H * K);
    m.blocks.push_back(std::move(blk));
  }
  m.head_w = u({R, H, 1}, H);
  m.head_b = u({R}, H);
  return m;
}

TensorPtr EmbedderModel::encode(Tape& tape, const TensorPtr& batch, bool mask,
                                core::Rng* rng) const {
  if (!batch || batch->rank() != 2) {
    throw std::invalid_argument("encode: batch must be (B,T), got " +
                                (batch ? core::shape_str(batch->shape) : std::string("null")));
  }
  const std::size_t B = batch->shape[0], T = batch->shape[1];
  if (T < 1) throw std::invalid_argument("encode: series length must be >= 1");
  const std::size_t H = config.hidden_dim;

  // per-timestamp input projection
  auto flat = core::reshape(tape, batch, {B * T, 1});
  auto proj = core::add(tape, core::matmul(tape, flat, proj_w), proj_b);  // (B*T,H)
  auto x = core::reshape(tape, proj, {B, T, H});

  if (mask && config.mask_probability > 0.0) {
    if (!rng) throw std::invalid_argument("encode: masking requested without an rng");
    std::vector<double> mvals(B * T);
    for (double& v : mvals) v = rng->bernoulli(config.mask_probability) ? 0.0 : 1.0;
    auto m = Tensor::create({B, T, 1}, std::move(mvals));
    x = core::mask_mul(tape, x, m);
  }

  for (const Block& blk : blocks) {
    auto y = core::conv1d(tape, x, blk.w1, blk.b1, blk.dilation, /*same_padding=*/true);
    y = core::relu(tape, y);
    y = core::conv1d(tape, y, blk.w2, blk.b2, blk.dilation, /*same_padding=*/true);
    x = core::add(tape, x, y);  // residual
  }
  return core::conv1d(tape, x, head_w, head_b, 1, /*same_padding=*/true);  // (B,T,R)
}

core::NamedTensors EmbedderModel::named_params() const {
  core::NamedTensors out;
  auto put = [&out](const std::string& n, const TensorPtr& t) {
    t->name = n;
    out.emplace_back(n, t);
  };
  put("enc.proj.w", proj_w);
  put("enc.proj.b", proj_b);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "enc.block" + std::to_string(i);
    put(p + ".w1", blocks[i].w1);
    put(p + ".b1", blocks[i].b1);
    put(p + ".w2", blocks[i].w2);
    put(p + ".b2", blocks[i].b2);
  }
  put("enc.head.w", head_w);
  put("enc.head.b", head_b);
  return out;
}

std::vector<TensorPtr> EmbedderModel::params() const {
  std::vector<TensorPtr> out;
  for (auto& [n, t] : named_params()) out.push_back(t);
  return out;
}

namespace {

// Shared core of both contrastive losses. Rows of `anchor` and `positive`
// are the n competing units (timestamps or instances); the loss for row k is
// -log softmax over {anchor_k . positive_j for all j} u {anchor_k . anchor_j
// for j != k}, with the positive term anchor_k . positive_k. Returns the sum
// over rows (caller averages).
TensorPtr contrastive_rows(Tape& tape, const TensorPtr& anchor, const TensorPtr& positive) {
  const std::size_t n = anchor->shape[0];
  auto cross = core::matmul(tape, anchor, core::transpose(tape, positive));  // (n,n)
  auto within = core::matmul(tape, anchor, core::transpose(tape, anchor));   // (n,n)

  // -1e9 on the diagonal removes the self term from the within-candidates
  std::vector<double> diag(n * n, 0.0);
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i * n + i] = -1e9;
    eye[i * n + i] = 1.0;
  }
  auto within_masked = core::add(tape, within, Tensor::create({n, n}, std::move(diag)));
  auto candidates = core::concat(tape, {cross, within_masked}, 1);  // (n,2n)
  auto lse = core::logsumexp_rows(tape, candidates);                // (n,1)

  auto pos = core::reduce_sum(tape, core::mul(tape, cross, Tensor::create({n, n}, std::move(eye))), 1,
                              /*keepdim=*/true);  // (n,1) diagonal of cross
  return core::reduce_sum_all(tape, core::sub(tape, lse, pos));
}

TensorPtr slice_instance(Tape& tape, const TensorPtr& h, std::size_t i) {
  const std::size_t L = h->shape[1], C = h->shape[2];
  return core::reshape(tape, core::slice(tape, h, 0, i, i + 1), {L, C});
}

TensorPtr slice_timestamp(Tape& tape, const TensorPtr& h, std::size_t t) {
  const std::size_t B = h->shape[0], C = h->shape[2];
  return core::reshape(tape, core::slice(tape, h, 1, t, t + 1), {B, C});
}

void check_loss_inputs(const TensorPtr& h1, const TensorPtr& h2, const char* op) {
  if (!h1 || !h2 || h1->rank() != 3 || h2->rank() != 3 || h1->shape != h2->shape) {
    throw std::invalid_argument(std::string(op) + ": expects two aligned (B,L,C) tensors, got " +
                                (h1 ? core::shape_str(h1->shape) : std::string("null")) + " and " +
                                (h2 ? core::shape_str(h2->shape) : std::string("null")));
  }
}

}  // namespace

TensorPtr temporal_loss(Tape& tape, const TensorPtr& h1, const TensorPtr& h2) {
  check_loss_inputs(h1, h2, "temporal_loss");
  const std::size_t B = h1->shape[0], L = h1->shape[1];
  TensorPtr acc = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < B; ++i) {
    acc = core::add(tape, acc, contrastive_rows(tape, slice_instance(tape, h1, i),
                                                slice_instance(tape, h2, i)));
  }
  return core::scale(tape, acc, 1.0 / static_cast<double>(B * L));
}

TensorPtr instance_loss(Tape& tape, const TensorPtr& h1, const TensorPtr& h2) {
  check_loss_inputs(h1, h2, "instance_loss");
  const std::size_t B = h1->shape[0], L = h1->shape[1];
  TensorPtr acc = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < L; ++t) {
    acc = core::add(tape, acc, contrastive_rows(tape, slice_timestamp(tape, h1, t),
                                                slice_timestamp(tape, h2, t)));
  }
  return core::scale(tape, acc, 1.0 / static_cast<double>(B * L));
}

TensorPtr total_loss(Tape& tape, const TensorPtr& h1, const TensorPtr& h2, bool hierarchical) {
  check_loss_inputs(h1, h2, "total_loss");
  if (!hierarchical) {
    return core::add(tape, temporal_loss(tape, h1, h2), instance_loss(tape, h1, h2));
  }
  TensorPtr a = h1, b = h2;
  TensorPtr acc = Tensor::scalar(0.0);
  std::size_t levels = 0;
  while (true) {
    acc = core::add(tape, acc,
                    core::add(tape, temporal_loss(tape, a, b), instance_loss(tape, a, b)));
    ++levels;
    if (a->shape[1] < 2) break;
    a = core::maxpool_time(tape, a, 2, 2);
    b = core::maxpool_time(tape, b, 2, 2);
  }
  return core::scale(tape, acc, 1.0 / static_cast<double>(levels));
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

EmbedderModel train_embedder(const std::vector<std::vector<double>>& series,
                             const EncoderConfig& cfg, core::Rng& rng, TrainCurve* curve) {
  cfg.validate();
  if (series.empty()) throw std::invalid_argument("train_embedder: empty training set");
  const std::size_t T = series[0].size();
  for (const auto& s : series) {
    if (s.size() != T) throw std::invalid_argument("train_embedder: series lengths differ");
  }
  if (T < 2) throw std::invalid_argument("train_embedder: series length must be >= 2");

  EmbedderModel model = EmbedderModel::init(cfg, rng);
  core::Adam opt(model.params(), cfg.learning_rate);

  std::vector<std::size_t> order(series.size());
  std::iota(order.begin(), order.end(), 0);

  Tape tape;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
      const CropPair cp = random_crop(T, rng);

      std::vector<double> v1, v2;
      v1.reserve(bsz * (cp.b1 - cp.a1));
      v2.reserve(bsz * (cp.b2 - cp.a2));
      for (std::size_t k = 0; k < bsz; ++k) {
        const auto& s = series[order[start + k]];
        v1.insert(v1.end(), s.begin() + static_cast<std::ptrdiff_t>(cp.a1),
                  s.begin() + static_cast<std::ptrdiff_t>(cp.b1));
        v2.insert(v2.end(), s.begin() + static_cast<std::ptrdiff_t>(cp.a2),
                  s.begin() + static_cast<std::ptrdiff_t>(cp.b2));
      }
      auto x1 = Tensor::create({bsz, cp.b1 - cp.a1}, std::move(v1));
      auto x2 = Tensor::create({bsz, cp.b2 - cp.a2}, std::move(v2));

      auto h1 = model.encode(tape, x1, /*mask=*/true, &rng);
      auto h2 = model.encode(tape, x2, /*mask=*/true, &rng);
      // overlap [a2,b1) in the local coordinates of each crop
      auto o1 = core::slice(tape, h1, 1, cp.a2 - cp.a1, cp.b1 - cp.a1);
      auto o2 = core::slice(tape, h2, 1, 0, cp.b1 - cp.a2);

      auto loss = total_loss(tape, o1, o2, cfg.hierarchical_levels);
      const double lv = loss->item();
      if (!std::isfinite(lv)) {
        throw std::runtime_error("train_embedder: loss became non-finite at epoch " +
                                 std::to_string(epoch + 1));
      }
      epoch_sum += lv;
      ++batches;
      tape.backward(loss);
      opt.step();
      tape.clear();
    }
    if (curve) curve->epoch_loss.push_back(epoch_sum / static_cast<double>(batches));
  }
  return model;
}

std::vector<double> embed_series(const EmbedderModel& model, const std::vector<double>& series) {
  Tape tape;
  core::NoGradGuard guard(tape);
  auto x = Tensor::create({1, series.size()}, series);
  auto h = model.encode(tape, x, /*mask=*/false, nullptr);        // (1,T,R)
  auto pooled = core::reduce_max(tape, h, 1, /*keepdim=*/false);  // (1,R)
  return pooled->values;
}

std::vector<std::vector<double>> embed_all(const EmbedderModel& model,
                                           const std::vector<std::vector<double>>& series) {
  std::vector<std::vector<double>> out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(embed_series(model, s));
  return out;
}

}  // namespace tsgzsl::encoder
