#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "tsgzsl/adam.hpp"
#include "tsgzsl/serialize.hpp"
#include "tsgzsl/tensor.hpp"

using namespace tsgzsl::core;

TEST_CASE("tensor creation validates shape against values") {
  CHECK_NOTHROW(Tensor::create({2, 3}, std::vector<double>(6, 0.0)));
  CHECK_THROWS(Tensor::create({2, 3}, std::vector<double>(5, 0.0)));
  CHECK_THROWS(Tensor::create({2, 0}, {}));
  CHECK_THROWS(Tensor::create({}, {}));
  auto t = Tensor::scalar(4.5);
  CHECK(t->item() == 4.5);
  CHECK_THROWS(Tensor::zeros({2, 2})->item());
}

TEST_CASE("forward examples") {
  Tape tape;
  SUBCASE("identity kernel convolution") {
    auto x = Tensor::create({1, 3, 1}, {1, 2, 3});
    auto w = Tensor::create({1, 1, 1}, {1});
    auto y = conv1d(tape, x, w, nullptr, 1, true);
    CHECK(y->values == std::vector<double>{1, 2, 3});
  }
  SUBCASE("relu definition") {
    auto y = relu(tape, Tensor::create({3}, {-1, 0, 2}));
    CHECK(y->values == std::vector<double>{0, 0, 2});
  }
  SUBCASE("maxpool definition") {
    auto y = maxpool_time(tape, Tensor::create({4}, {3, 1, 4, 1}), 2, 2);
    CHECK(y->values == std::vector<double>{3, 4});
  }
  SUBCASE("shape mismatch reports both shapes") {
    auto a = Tensor::create({2, 3}, std::vector<double>(6, 1.0));
    auto b = Tensor::create({4}, std::vector<double>(4, 1.0));
    CHECK_THROWS_WITH_AS(add(tape, a, b), doctest::Contains("(2,3)"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(matmul(tape, a, b), doctest::Contains("(4)"), std::invalid_argument);
  }
  SUBCASE("broadcasting add and mul") {
    auto a = Tensor::create({2, 3}, {1, 2, 3, 4, 5, 6});
    auto row = Tensor::create({3}, {10, 20, 30});
    auto col = Tensor::create({2, 1}, {100, 200});
    CHECK(add(tape, a, row)->values == std::vector<double>{11, 22, 33, 14, 25, 36});
    CHECK(mul(tape, a, col)->values == std::vector<double>{100, 200, 300, 800, 1000, 1200});
  }
}

TEST_CASE("backward basics") {
  SUBCASE("d(x.x)/dx = 2x") {
    Tape tape;
    auto x = Tensor::create({1}, {3.0}, true);
    auto loss = dot(tape, x, x);
    tape.backward(loss);
    CHECK(x->grad[0] == doctest::Approx(6.0).epsilon(1e-12));
  }
  SUBCASE("relu subgradient is 0 at negative input") {
    Tape tape;
    auto x = Tensor::create({2}, {-1.0, 2.0}, true);
    auto loss = reduce_sum_all(tape, relu(tape, x));
    tape.backward(loss);
    CHECK(x->grad == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    auto x = Tensor::create({2}, {1.0, 2.0}, true);
    auto y = relu(tape, x);
    CHECK_THROWS(tape.backward(y));
  }
  SUBCASE("empty tape rejected") {
    Tape tape;
    auto loss = Tensor::scalar(1.0, true);
    CHECK_THROWS(tape.backward(loss));
  }
}

TEST_CASE("random 3-layer network gradient matches finite differences") {
  Rng rng(11);
  auto w1 = oracles::random_tensor({4, 6}, rng);
  auto b1 = oracles::random_tensor({6}, rng);
  auto w2 = oracles::random_tensor({6, 5}, rng);
  auto b2 = oracles::random_tensor({5}, rng);
  auto w3 = oracles::random_tensor({5, 1}, rng);
  auto x = oracles::random_tensor({3, 4}, rng, -1, 1, false);
  auto build = [&](Tape& t) {
    auto h1 = relu(t, add(t, matmul(t, x, w1), b1));
    auto h2 = relu(t, add(t, matmul(t, h1, w2), b2));
    auto out = matmul(t, h2, w3);
    return reduce_mean_all(t, mul(t, out, out));
  };
  auto res = oracles::grad_check({w1, b1, w2, b2, w3}, build);
  CHECK(res.max_rel_err < 1e-4);
}

namespace {

// Loss = sum(weights * op_output) with fixed random weights, so permutation
// and routing bugs change the gradient.
tsgzsl::core::TensorPtr weighted(Tape& t, const TensorPtr& out, const TensorPtr& w) {
  return reduce_sum_all(t, mul(t, out, w));
}

struct PrimitiveCase {
  const char* name;
  std::function<double(Rng&)> run;  // returns max rel err of one instance
};

double check_build(const std::vector<TensorPtr>& params,
                   const std::function<TensorPtr(Tape&)>& build) {
  return oracles::grad_check(params, build).max_rel_err;
}

}  // namespace

TEST_CASE("every primitive passes 100 random gradient checks") {
  std::vector<PrimitiveCase> cases;
  auto elementwise = [&](const char* name, auto opfn) {
    cases.push_back({name, [opfn](Rng& rng) {
                       // occasionally exercise broadcasting on the second arg
                       const bool bcast = rng.bernoulli(0.3);
                       auto a = oracles::random_tensor({2, 3}, rng, 0.3, 1.4);
                       auto b = bcast ? oracles::random_tensor({3}, rng, 0.3, 1.4)
                                      : oracles::random_tensor({2, 3}, rng, 0.3, 1.4);
                       auto w = oracles::random_tensor({2, 3}, rng, -1, 1, false);
                       return check_build({a, b}, [&](Tape& t) {
                         return weighted(t, opfn(t, a, b), w);
                       });
                     }});
  };
  elementwise("add", [](Tape& t, auto a, auto b) { return add(t, a, b); });
  elementwise("sub", [](Tape& t, auto a, auto b) { return sub(t, a, b); });
  elementwise("mul", [](Tape& t, auto a, auto b) { return mul(t, a, b); });
  elementwise("div", [](Tape& t, auto a, auto b) { return div(t, a, b); });
  elementwise("mask_mul", [](Tape& t, auto a, auto b) { return mask_mul(t, a, b); });

  cases.push_back({"exp", [](Rng& rng) {
                     auto a = oracles::random_tensor({2, 4}, rng, -1.5, 1.5);
                     auto w = oracles::random_tensor({2, 4}, rng, -1, 1, false);
                     return check_build({a}, [&](Tape& t) { return weighted(t, exp(t, a), w); });
                   }});
  cases.push_back({"log", [](Rng& rng) {
                     auto a = oracles::random_tensor({2, 4}, rng, 0.3, 3.0);
                     auto w = oracles::random_tensor({2, 4}, rng, -1, 1, false);
                     return check_build({a}, [&](Tape& t) { return weighted(t, log(t, a), w); });
                   }});
  cases.push_back({"relu", [](Rng& rng) {
                     // keep values away from the kink
                     auto a = oracles::random_tensor({3, 3}, rng, -2.0, 2.0);
                     for (double& v : a->values) {
                       if (std::fabs(v) < 1e-2) v = v < 0 ? v - 0.05 : v + 0.05;
                     }
                     auto w = oracles::random_tensor({3, 3}, rng, -1, 1, false);
                     return check_build({a}, [&](Tape& t) { return weighted(t, relu(t, a), w); });
                   }});
  cases.push_back({"matmul", [](Rng& rng) {
                     auto a = oracles::random_tensor({3, 4}, rng);
                     auto b = oracles::random_tensor({4, 2}, rng);
                     auto w = oracles::random_tensor({3, 2}, rng, -1, 1, false);
                     return check_build({a, b}, [&](Tape& t) {
                       return weighted(t, matmul(t, a, b), w);
                     });
                   }});
  cases.push_back({"transpose", [](Rng& rng) {
                     auto a = oracles::random_tensor({3, 4}, rng);
                     auto w = oracles::random_tensor({4, 3}, rng, -1, 1, false);
                     return check_build({a}, [&](Tape& t) {
                       return weighted(t, transpose(t, a), w);
                     });
                   }});
  cases.push_back({"dot", [](Rng& rng) {
                     auto a = oracles::random_tensor({5}, rng);
                     auto b = oracles::random_tensor({5}, rng);
                     return check_build({a, b}, [&](Tape& t) { return dot(t, a, b); });
                   }});
  cases.push_back({"conv1d", [](Rng& rng) {
                     const std::size_t d = 1 + rng.uniform_int(2);
                     const std::size_t K = 2 + rng.uniform_int(2);  // even kernels too
                     const bool same = rng.bernoulli(0.5);
                     auto x = oracles::random_tensor({2, 7, 2}, rng);
                     auto w = oracles::random_tensor({3, 2, K}, rng);
                     auto b = oracles::random_tensor({3}, rng);
                     const std::size_t t_out = same ? 7 : 7 - d * (K - 1);
                     auto wt = oracles::random_tensor({2, t_out, 3}, rng, -1, 1, false);
                     return check_build({x, w, b}, [&](Tape& t) {
                       return weighted(t, conv1d(t, x, w, b, d, same), wt);
                     });
                   }});
  cases.push_back({"maxpool", [](Rng& rng) {
                     auto x = oracles::random_tensor({2, 6, 2}, rng);
                     auto w = oracles::random_tensor({2, 3, 2}, rng, -1, 1, false);
                     return check_build({x}, [&](Tape& t) {
                       return weighted(t, maxpool_time(t, x, 2, 2), w);
                     });
                   }});
  cases.push_back({"reduce_sum", [](Rng& rng) {
                     auto x = oracles::random_tensor({3, 4}, rng);
                     auto w = oracles::random_tensor({3, 1}, rng, -1, 1, false);
                     return check_build({x}, [&](Tape& t) {
                       return weighted(t, reduce_sum(t, x, 1, true), w);
                     });
                   }});
  cases.push_back({"reduce_mean", [](Rng& rng) {
                     auto x = oracles::random_tensor({3, 4}, rng);
                     auto w = oracles::random_tensor({4}, rng, -1, 1, false);
                     return check_build({x}, [&](Tape& t) {
                       return weighted(t, reduce_mean(t, x, 0, false), w);
                     });
                   }});
  cases.push_back({"reduce_max", [](Rng& rng) {
                     auto x = oracles::random_tensor({3, 5}, rng);
                     auto w = oracles::random_tensor({3, 1}, rng, -1, 1, false);
                     return check_build({x}, [&](Tape& t) {
                       return weighted(t, reduce_max(t, x, 1, true), w);
                     });
                   }});
  cases.push_back({"concat", [](Rng& rng) {
                     auto a = oracles::random_tensor({2, 2}, rng);
                     auto b = oracles::random_tensor({2, 3}, rng);
                     auto w = oracles::random_tensor({2, 5}, rng, -1, 1, false);
                     return check_build({a, b}, [&](Tape& t) {
                       return weighted(t, concat(t, {a, b}, 1), w);
                     });
                   }});
  cases.push_back({"slice", [](Rng& rng) {
                     auto x = oracles::random_tensor({2, 6, 2}, rng);
                     auto w = oracles::random_tensor({2, 3, 2}, rng, -1, 1, false);
                     return check_build({x}, [&](Tape& t) {
                       return weighted(t, slice(t, x, 1, 2, 5), w);
                     });
                   }});
  cases.push_back({"reshape", [](Rng& rng) {
                     auto x = oracles::random_tensor({2, 6}, rng);
                     auto w = oracles::random_tensor({3, 4}, rng, -1, 1, false);
                     return check_build({x}, [&](Tape& t) {
                       return weighted(t, reshape(t, x, {3, 4}), w);
                     });
                   }});
  cases.push_back({"logsumexp_rows", [](Rng& rng) {
                     auto x = oracles::random_tensor({3, 5}, rng, -2, 2);
                     auto w = oracles::random_tensor({3, 1}, rng, -1, 1, false);
                     return check_build({x}, [&](Tape& t) {
                       return weighted(t, logsumexp_rows(t, x), w);
                     });
                   }});

  for (const auto& c : cases) {
    CAPTURE(c.name);
    Rng rng(0xABCD ^ std::hash<std::string>{}(c.name));
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) worst = std::max(worst, c.run(rng));
    INFO(c.name << " worst rel err " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("convolution output length follows the padding formula") {
  Tape tape;
  Rng rng(5);
  for (std::size_t K : {1u, 2u, 3u, 5u}) {
    for (std::size_t d : {1u, 2u, 4u}) {
      const std::size_t T = 16;
      auto x = oracles::random_tensor({1, T, 1}, rng, -1, 1, false);
      auto w = oracles::random_tensor({1, 1, K}, rng, -1, 1, false);
      auto same = conv1d(tape, x, w, nullptr, d, true);
      CHECK(same->shape[1] == T);
      if (T > d * (K - 1)) {
        auto valid = conv1d(tape, x, w, nullptr, d, false);
        CHECK(valid->shape[1] == T - d * (K - 1));
      }
    }
  }
  // effective span longer than the input is rejected without padding
  auto x = oracles::random_tensor({1, 3, 1}, rng, -1, 1, false);
  auto w = oracles::random_tensor({1, 1, 4}, rng, -1, 1, false);
  CHECK_THROWS(conv1d(tape, x, w, nullptr, 1, false));
}

TEST_CASE("tape records ops in execution order") {
  Tape tape;
  auto x = Tensor::create({2}, {1.0, 2.0}, true);
  auto y = relu(tape, x);
  auto loss = dot(tape, y, y);
  REQUIRE(tape.size() == 2);
  CHECK(tape.node(0).op == "relu");
  CHECK(tape.node(1).op == "dot");
  CHECK(tape.node(0).inputs[0] == x);
  CHECK(tape.node(1).output == loss);
  tape.clear();
  CHECK(tape.size() == 0);

  // nothing is recorded while disabled
  {
    NoGradGuard guard(tape);
    auto z = relu(tape, x);
    CHECK_FALSE(z->requires_grad);
  }
  CHECK(tape.size() == 0);
  CHECK(tape.enabled());
}

TEST_CASE("reverse sweep is deterministic bit-for-bit") {
  auto run = [](std::vector<double>* grads) {
    Rng rng(77);
    Tape tape;
    auto a = oracles::random_tensor({4, 4}, rng);
    auto b = oracles::random_tensor({4, 4}, rng);
    auto loss = reduce_mean_all(tape, exp(tape, mul(tape, matmul(tape, a, b), b)));
    tape.backward(loss);
    grads->insert(grads->end(), a->grad.begin(), a->grad.end());
    grads->insert(grads->end(), b->grad.begin(), b->grad.end());
  };
  std::vector<double> g1, g2;
  run(&g1);
  run(&g2);
  CHECK(g1 == g2);  // exact equality, not approximate
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves the parameter unchanged") {
    Tape tape;
    auto x = Tensor::create({1}, {2.0}, true);
    auto zero = Tensor::scalar(0.0);
    auto loss = mul(tape, dot(tape, x, x), zero);
    tape.backward(loss);
    Adam opt({x}, 1e-3);
    opt.step();
    CHECK(x->values[0] == 2.0);
  }
  SUBCASE("first step with unit gradient moves by about lr") {
    Tape tape;
    auto x = Tensor::create({1}, {5.0}, true);
    // loss = 1 * x  -> grad 1
    auto one = Tensor::scalar(1.0);
    auto loss = dot(tape, x, one);
    tape.backward(loss);
    Adam opt({x}, 1e-3);
    opt.step();
    CHECK(x->values[0] == doctest::Approx(5.0 - 1e-3).epsilon(1e-6));
  }
  SUBCASE("missing grad names the parameter") {
    auto x = Tensor::create({1}, {1.0}, true);
    x->name = "mystery";
    Adam opt({x}, 1e-3);
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("mystery"), std::runtime_error);
  }
  SUBCASE("10 steps on x^2 match the hand recurrence and decrease f") {
    const double lr = 0.05;
    // independent scalar recurrence
    double xs = 1.0, m = 0.0, v = 0.0;
    std::vector<double> expected;
    for (int t = 1; t <= 10; ++t) {
      const double g = 2.0 * xs;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      xs -= lr * mh / (std::sqrt(vh) + 1e-8);
      expected.push_back(xs);
    }

    auto x = Tensor::create({1}, {1.0}, true);
    Adam opt({x}, lr);
    double prev_f = 1.0;
    for (int t = 0; t < 10; ++t) {
      Tape tape;
      auto loss = dot(tape, x, x);
      tape.backward(loss);
      opt.step();
      CHECK(x->values[0] == doctest::Approx(expected[t]).epsilon(1e-12));
      const double f = x->values[0] * x->values[0];
      if (t >= 1) CHECK(f < prev_f);
      prev_f = f;
    }
  }
}

TEST_CASE("model container round-trips named tensors") {
  Rng rng(3);
  const std::string path = (std::filesystem::temp_directory_path() / "tsgzsl_container_test.bin").string();
  auto a = oracles::random_tensor({2, 3}, rng);
  auto b = oracles::random_tensor({4}, rng);
  save_tensors(path, {{"alpha", a}, {"beta", b}});
  auto loaded = load_tensors(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].first == "alpha");
  CHECK(loaded[0].second->shape == Shape{2, 3});
  CHECK(loaded[0].second->values == a->values);
  CHECK(loaded[1].second->values == b->values);

  auto a2 = Tensor::zeros({2, 3}, true);
  auto b2 = Tensor::zeros({4}, true);
  load_into(path, {{"alpha", a2}, {"beta", b2}});
  CHECK(a2->values == a->values);

  auto wrong = Tensor::zeros({3, 2}, true);
  CHECK_THROWS(load_into(path, {{"alpha", wrong}, {"beta", b2}}));
  CHECK_THROWS(load_tensors(path + ".does_not_exist"));

  SUBCASE("corrupted containers are rejected") {
    const std::string junk = path + ".junk";
    {
      std::ofstream os(junk, std::ios::binary);
      os << "not a container at all";
    }
    CHECK_THROWS_WITH_AS(load_tensors(junk), doctest::Contains("magic"), std::runtime_error);

    // truncate the valid container mid-values
    const std::string cut = path + ".cut";
    {
      std::ifstream is(path, std::ios::binary);
      std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
      std::ofstream os(cut, std::ios::binary);
      os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
    }
    CHECK_THROWS_WITH_AS(load_tensors(cut), doctest::Contains("truncated"), std::runtime_error);
    std::filesystem::remove(junk);
    std::filesystem::remove(cut);
  }
  std::filesystem::remove(path);
}
