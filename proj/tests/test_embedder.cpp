#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "tsgzsl/embedder.hpp"

using namespace tsgzsl::encoder;
using tsgzsl::core::Rng;
using tsgzsl::core::Tape;
using tsgzsl::core::Tensor;
using tsgzsl::core::TensorPtr;

namespace {

TensorPtr rep_tensor(const oracles::Rep& r) {
  const std::size_t B = r.size(), L = r[0].size(), C = r[0][0].size();
  std::vector<double> vals;
  vals.reserve(B * L * C);
  for (const auto& inst : r)
    for (const auto& ts : inst) vals.insert(vals.end(), ts.begin(), ts.end());
  return Tensor::create({B, L, C}, std::move(vals));
}

oracles::Rep random_rep(std::size_t B, std::size_t L, std::size_t C, Rng& rng) {
  oracles::Rep r(B, std::vector<std::vector<double>>(L, std::vector<double>(C)));
  for (auto& inst : r)
    for (auto& ts : inst)
      for (double& v : ts) v = rng.uniform_real(-1.0, 1.0);
  return r;
}

std::vector<std::vector<double>> sine_square_series(std::size_t n, std::size_t t_len, Rng& rng) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(t_len);
    const double phase = rng.uniform01();
    for (std::size_t t = 0; t < t_len; ++t) {
      const double x = 2.0 * 3.14159265358979 * (3.0 * t / double(t_len) + phase);
      s[t] = (i % 2 == 0) ? std::sin(x) : (std::sin(x) >= 0 ? 1.0 : -1.0);
      s[t] += rng.normal(0.0, 0.05);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("random_crop") {
  SUBCASE("length below 2 rejected") {
    Rng rng(1);
    CHECK_THROWS(random_crop(1, rng));
  }
  SUBCASE("T=2 only produces overlap-respecting pairs") {
    Rng rng(2);
    bool saw_full = false;
    for (int i = 0; i < 200; ++i) {
      const CropPair cp = random_crop(2, rng);
      CHECK(cp.a1 <= cp.a2);
      CHECK(cp.a2 < cp.b1);
      CHECK(cp.b1 <= cp.b2);
      CHECK(cp.b2 <= 2);
      CHECK(cp.overlap_len() >= 1);
      if (cp.a1 == 0 && cp.b1 == 2 && cp.a2 == 0 && cp.b2 == 2) saw_full = true;
    }
    CHECK(saw_full);  // the [0,2),[0,2) configuration is reachable
  }
  SUBCASE("T=50 sampling covers varied positions") {
    Rng rng(3);
    std::set<std::size_t> a1_values;
    std::size_t min_overlap = 1000;
    for (int i = 0; i < 1000; ++i) {
      const CropPair cp = random_crop(50, rng);
      CHECK(cp.a1 <= cp.a2);
      CHECK(cp.a2 < cp.b1);
      CHECK(cp.b1 <= cp.b2);
      CHECK(cp.b2 <= 50);
      a1_values.insert(cp.a1);
      min_overlap = std::min(min_overlap, cp.overlap_len());
    }
    CHECK(min_overlap >= 1);
    CHECK(a1_values.size() >= 10);
  }
}

TEST_CASE("encode") {
  EncoderConfig cfg;
  cfg.repr_dim = 5;
  cfg.hidden_dim = 6;
  cfg.num_residual_blocks = 2;
  cfg.kernel_size = 3;
  Rng rng(4);
  EmbedderModel model = EmbedderModel::init(cfg, rng);
  Tape tape;

  SUBCASE("zeroed head gives all-zero representations") {
    std::fill(model.head_w->values.begin(), model.head_w->values.end(), 0.0);
    std::fill(model.head_b->values.begin(), model.head_b->values.end(), 0.0);
    auto x = Tensor::create({2, 8}, std::vector<double>(16, 0.7));
    auto h = model.encode(tape, x, false, nullptr);
    for (double v : h->values) CHECK(v == 0.0);
  }
  SUBCASE("mask probability 0 equals masking disabled, bitwise") {
    EncoderConfig c0 = cfg;
    c0.mask_probability = 0.0;
    Rng r2(4);
    EmbedderModel m0 = EmbedderModel::init(c0, r2);
    auto x = Tensor::create({2, 8}, [] {
      std::vector<double> v(16);
      for (std::size_t i = 0; i < 16; ++i) v[i] = std::sin(double(i));
      return v;
    }());
    Rng mask_rng(9);
    auto h1 = m0.encode(tape, x, true, &mask_rng);
    auto h2 = m0.encode(tape, x, false, nullptr);
    CHECK(h1->values == h2->values);
  }
  SUBCASE("output shape is (B, T_crop, repr_dim) across configs") {
    Rng shape_rng(10);
    for (int rep = 0; rep < 8; ++rep) {
      EncoderConfig c = cfg;
      c.repr_dim = 1 + shape_rng.uniform_int(6);
      c.hidden_dim = 2 + shape_rng.uniform_int(6);
      c.num_residual_blocks = 1 + shape_rng.uniform_int(3);
      Rng init_rng(rep);
      EmbedderModel m = EmbedderModel::init(c, init_rng);
      const std::size_t B = 1 + shape_rng.uniform_int(3);
      const std::size_t T = 2 + shape_rng.uniform_int(14);
      auto x = oracles::random_tensor({B, T}, shape_rng, -1, 1, false);
      auto h = m.encode(tape, x, false, nullptr);
      CHECK(h->shape == tsgzsl::core::Shape{B, T, c.repr_dim});
    }
  }
  SUBCASE("masking zeroes whole timestamps") {
    EncoderConfig c = cfg;
    c.num_residual_blocks = 0;  // projection + head only, so zeros stay visible
    c.mask_probability = 1.0;
    Rng r3(6);
    EmbedderModel m = EmbedderModel::init(c, r3);
    std::fill(m.head_b->values.begin(), m.head_b->values.end(), 0.0);
    std::fill(m.proj_b->values.begin(), m.proj_b->values.end(), 0.0);
    auto x = Tensor::create({1, 4}, {1, 2, 3, 4});
    Rng mask_rng(0);
    auto h = m.encode(tape, x, true, &mask_rng);
    for (double v : h->values) CHECK(v == 0.0);  // everything masked at p=1
  }
}

TEST_CASE("contrastive losses: closed forms for identical representations") {
  // all-zero vectors make every similarity equal
  SUBCASE("temporal ln(2|L|-1)") {
    Tape tape;
    auto h = Tensor::zeros({2, 4, 3});
    auto hp = Tensor::zeros({2, 4, 3});
    CHECK(temporal_loss(tape, h, hp)->item() == doctest::Approx(std::log(7.0)).epsilon(1e-9));
  }
  SUBCASE("temporal |L|=1 is exactly 0") {
    Tape tape;
    auto h = Tensor::zeros({3, 1, 2});
    CHECK(temporal_loss(tape, h, h)->item() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("instance ln(2B-1) for B=4") {
    Tape tape;
    auto h = Tensor::zeros({4, 3, 2});
    CHECK(instance_loss(tape, h, h)->item() == doctest::Approx(std::log(7.0)).epsilon(1e-9));
  }
  SUBCASE("instance B=1 is exactly 0") {
    Tape tape;
    auto h = Tensor::zeros({1, 5, 2});
    CHECK(instance_loss(tape, h, h)->item() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("identical nonzero representations also hit the closed form") {
    Tape tape;
    auto h = Tensor::full({3, 5, 2}, 0.8);
    auto hp = Tensor::full({3, 5, 2}, 0.8);
    CHECK(temporal_loss(tape, h, hp)->item() == doctest::Approx(std::log(9.0)).epsilon(1e-9));
    CHECK(instance_loss(tape, h, hp)->item() == doctest::Approx(std::log(5.0)).epsilon(1e-9));
  }
}

TEST_CASE("contrastive losses match the naive double-loop oracle") {
  Rng rng(40);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t B = 1 + rng.uniform_int(4);   // B <= 4
    const std::size_t L = 1 + rng.uniform_int(8);   // |overlap| <= 8
    const std::size_t C = 1 + rng.uniform_int(4);   // repr_dim <= 4
    const auto r1 = random_rep(B, L, C, rng);
    const auto r2 = random_rep(B, L, C, rng);
    Tape tape;
    auto h1 = rep_tensor(r1);
    auto h2 = rep_tensor(r2);
    CHECK(temporal_loss(tape, h1, h2)->item() ==
          doctest::Approx(oracles::naive_temporal_loss(r1, r2)).epsilon(1e-6));
    CHECK(instance_loss(tape, h1, h2)->item() ==
          doctest::Approx(oracles::naive_instance_loss(r1, r2)).epsilon(1e-6));
  }
}

TEST_CASE("total_loss") {
  Rng rng(50);
  SUBCASE("zero components give zero") {
    Tape tape;
    auto h = Tensor::zeros({1, 1, 2});
    CHECK(total_loss(tape, h, h, false)->item() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("equals temporal + instance when hierarchy is disabled") {
    const auto r1 = random_rep(3, 6, 3, rng);
    const auto r2 = random_rep(3, 6, 3, rng);
    Tape tape;
    auto h1 = rep_tensor(r1);
    auto h2 = rep_tensor(r2);
    const double sum = temporal_loss(tape, h1, h2)->item() + instance_loss(tape, h1, h2)->item();
    CHECK(total_loss(tape, h1, h2, false)->item() == doctest::Approx(sum).epsilon(1e-12));
  }
  SUBCASE("hierarchical value on a length-4 overlap equals the 3-level average") {
    const auto r1 = random_rep(2, 4, 3, rng);
    const auto r2 = random_rep(2, 4, 3, rng);
    Tape tape;
    auto h1 = rep_tensor(r1);
    auto h2 = rep_tensor(r2);

    // manual pooling oracle: levels at lengths 4, 2, 1
    auto pool = [](const oracles::Rep& r) {
      oracles::Rep out(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t t = 0; t + 1 < r[i].size(); t += 2) {
          std::vector<double> m(r[i][t].size());
          for (std::size_t c = 0; c < m.size(); ++c) m[c] = std::max(r[i][t][c], r[i][t + 1][c]);
          out[i].push_back(std::move(m));
        }
      }
      return out;
    };
    double expected = 0.0;
    oracles::Rep a = r1, b = r2;
    int levels = 0;
    for (;;) {
      expected += oracles::naive_temporal_loss(a, b) + oracles::naive_instance_loss(a, b);
      ++levels;
      if (a[0].size() < 2) break;
      a = pool(a);
      b = pool(b);
    }
    CHECK(levels == 3);
    expected /= levels;
    CHECK(total_loss(tape, h1, h2, true)->item() == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("gradient of total_loss w.r.t. encoder parameters matches finite differences") {
  EncoderConfig cfg;
  cfg.repr_dim = 2;
  cfg.hidden_dim = 3;
  cfg.num_residual_blocks = 1;
  cfg.kernel_size = 3;
  cfg.mask_probability = 0.0;
  Rng rng(60);
  EmbedderModel model = EmbedderModel::init(cfg, rng);
  auto x1 = oracles::random_tensor({2, 6}, rng, -1, 1, false);
  auto x2 = oracles::random_tensor({2, 6}, rng, -1, 1, false);
  auto build = [&](Tape& t) {
    auto h1 = model.encode(t, x1, false, nullptr);
    auto h2 = model.encode(t, x2, false, nullptr);
    return total_loss(t, h1, h2, true);
  };
  auto res = oracles::grad_check(model.params(), build);
  INFO("worst rel err " << res.max_rel_err << " over " << res.coords << " coordinates");
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("train_embedder") {
  SUBCASE("one epoch on constant series stays finite") {
    EncoderConfig cfg;
    cfg.repr_dim = 3;
    cfg.hidden_dim = 4;
    cfg.num_residual_blocks = 1;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    Rng rng(70);
    std::vector<std::vector<double>> series(4, std::vector<double>(10, 1.0));
    TrainCurve curve;
    EmbedderModel m = train_embedder(series, cfg, rng, &curve);
    REQUIRE(curve.epoch_loss.size() == 1);
    CHECK(std::isfinite(curve.epoch_loss[0]));
    for (const auto& [name, p] : m.named_params()) {
      for (double v : p->values) CHECK(std::isfinite(v));
    }
  }
  SUBCASE("loss after 50 epochs is below the first epoch on sine vs square") {
    EncoderConfig cfg;
    cfg.repr_dim = 4;
    cfg.hidden_dim = 8;
    cfg.num_residual_blocks = 1;
    cfg.epochs = 50;
    cfg.batch_size = 16;  // several batches per epoch averages out crop-size noise
    cfg.mask_probability = 0.3;
    Rng rng(71);
    Rng data_rng(72);
    auto series = sine_square_series(64, 24, data_rng);
    TrainCurve curve;
    train_embedder(series, cfg, rng, &curve);
    REQUIRE(curve.epoch_loss.size() == 50);
    CHECK(curve.epoch_loss[49] < curve.epoch_loss[0]);
    // smoothed trend: the final stretch sits below the opening stretch
    auto mean5 = [&](std::size_t from) {
      double s = 0.0;
      for (std::size_t e = from; e < from + 5; ++e) s += curve.epoch_loss[e];
      return s / 5.0;
    };
    CHECK(mean5(45) < mean5(0));
  }
  SUBCASE("fixed seed reproduces final parameters exactly") {
    EncoderConfig cfg;
    cfg.repr_dim = 3;
    cfg.hidden_dim = 4;
    cfg.num_residual_blocks = 1;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    Rng data_rng(73);
    auto series = sine_square_series(12, 16, data_rng);
    Rng r1(99), r2(99);
    EmbedderModel m1 = train_embedder(series, cfg, r1);
    EmbedderModel m2 = train_embedder(series, cfg, r2);
    auto p1 = m1.named_params(), p2 = m2.named_params();
    for (std::size_t i = 0; i < p1.size(); ++i) {
      CHECK(p1[i].second->values == p2[i].second->values);
    }
  }
  SUBCASE("empty training set rejected") {
    EncoderConfig cfg;
    Rng rng(74);
    CHECK_THROWS(train_embedder({}, cfg, rng));
  }
  SUBCASE("batch size below 2 rejected: instance loss needs negatives") {
    EncoderConfig cfg;
    cfg.batch_size = 1;
    Rng rng(75);
    std::vector<std::vector<double>> series(4, std::vector<double>(8, 0.5));
    CHECK_THROWS(train_embedder(series, cfg, rng));
    cfg.batch_size = 2;
    cfg.repr_dim = 0;
    CHECK_THROWS(train_embedder(series, cfg, rng));
  }
}

TEST_CASE("embed_series") {
  EncoderConfig cfg;
  cfg.repr_dim = 4;
  cfg.hidden_dim = 5;
  cfg.num_residual_blocks = 1;
  Rng rng(80);
  EmbedderModel model = EmbedderModel::init(cfg, rng);

  SUBCASE("equals the coordinatewise max of encode output") {
    std::vector<double> series(12);
    for (std::size_t t = 0; t < series.size(); ++t) series[t] = std::sin(0.7 * double(t));
    const auto emb = embed_series(model, series);
    REQUIRE(emb.size() == 4);
    Tape tape;
    tsgzsl::core::NoGradGuard guard(tape);
    auto h = model.encode(tape, Tensor::create({1, 12}, series), false, nullptr);
    for (std::size_t c = 0; c < 4; ++c) {
      double best = -1e300;
      for (std::size_t t = 0; t < 12; ++t) best = std::max(best, h->values[t * 4 + c]);
      CHECK(emb[c] == best);
    }
  }
  SUBCASE("zero representations give the zero vector") {
    std::fill(model.head_w->values.begin(), model.head_w->values.end(), 0.0);
    std::fill(model.head_b->values.begin(), model.head_b->values.end(), 0.0);
    const auto emb = embed_series(model, std::vector<double>(9, 0.4));
    for (double v : emb) CHECK(v == 0.0);
  }
}
