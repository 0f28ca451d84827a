#include <cmath>

#include "doctest.h"
#include "roomsense/error.hpp"
#include "roomsense/layers.hpp"
#include "roomsense/loss.hpp"
#include "roomsense/optim.hpp"
#include "support/gradient_suite.hpp"

using namespace roomsense;
using roomsense::testing::random_tensor;

TEST_CASE("every layer passes finite-difference checks") {
  for (const auto& [name, rep] : testing::layer_gradient_suite(11)) {
    INFO(name, " max_rel=", rep.max_rel);
    CHECK(rep.ok());
  }
}

TEST_CASE("conv1d example") {
  ParamStore ps;
  Conv1d conv(ps, "c", 1, 1, 3);
  ps[conv.weight()].value = {1, 0, -1};
  Tensor x({1, 1, 3}, {1, 2, 3});
  const Tensor y = conv.forward(ps, x);
  CHECK(y.values() == std::vector<double>{-2, -2, 2});
}

TEST_CASE("conv1d matches a direct loop") {
  Rng rng(3);
  ParamStore ps;
  Conv1d conv(ps, "c", 3, 4, 4);
  init_uniform(ps[conv.weight()], 1.0, rng);
  const Tensor x = random_tensor({2, 3, 6}, rng);
  const Tensor y = conv.forward(ps, x);
  const auto& w = ps[conv.weight()].value;
  const long left = (4 - 1) / 2;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t f = 0; f < 4; ++f)
      for (long t = 0; t < 6; ++t) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c)
          for (long k = 0; k < 4; ++k) {
            const long src = t + k - left;
            if (src >= 0 && src < 6) s += w[(f * 3 + c) * 4 + k] * x.at(n, c, src);
          }
        CHECK(y.at(n, f, t) == doctest::Approx(s).epsilon(1e-12));
      }
}

TEST_CASE("batchnorm statistics") {
  ParamStore ps;
  BatchNorm1d bn(ps, "bn", 2);
  Rng rng(1);
  CHECK_THROWS_AS(bn.forward(ps, random_tensor({2, 2, 3}, rng), Mode::eval), StateError);
  const Tensor x = random_tensor({4, 2, 5}, rng, 3.0);
  const Tensor y = bn.forward(ps, x, Mode::train);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0, var = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t t = 0; t < 5; ++t) mean += y.at(n, c, t);
    mean /= 20;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t t = 0; t < 5; ++t) var += (y.at(n, c, t) - mean) * (y.at(n, c, t) - mean);
    var /= 20;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  CHECK_NOTHROW(bn.forward(ps, x, Mode::eval));
  // one momentum step from (0, 1)
  double mean0 = 0;
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t t = 0; t < 5; ++t) mean0 += x.at(n, 0, t);
  mean0 /= 20;
  CHECK(ps[bn.running_mean()].value[0] == doctest::Approx(0.1 * mean0));
}

TEST_CASE("dropout and pooling behaviour") {
  Rng rng(2);
  const Tensor x = random_tensor({3, 2, 4}, rng);
  Dropout d(0.5);
  CHECK(d.forward(x, Mode::eval, 1) == x);
  const Tensor a = d.forward(x, Mode::train, 7), b = d.forward(x, Mode::train, 7);
  CHECK(a == b);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK((a[i] == 0.0 || a[i] == doctest::Approx(2.0 * x[i])));

  MaxPool1d pool(3);
  const Tensor p = pool.forward(Tensor({1, 1, 5}, {1, 5, 2, 0, 3}));
  CHECK(p.values() == std::vector<double>{5, 5, 5, 3, 3});
  GlobalAvgPool gap;
  const Tensor g = gap.forward(Tensor({1, 2, 2}, {1, 3, 4, 8}));
  CHECK(g.values() == std::vector<double>{2, 6});
}

TEST_CASE("lstm last output is the final step of the sequence output") {
  Rng rng(9);
  ParamStore ps;
  Lstm seq(ps, "a", 3, 4, true, LstmOutput::sequence);
  ParamStore ps2 = ps;
  Lstm last_layer(ps2, "b", 3, 4, true, LstmOutput::last);
  for (std::size_t i = 0; i < ps.size(); ++i) init_uniform(ps[i], 0.5, rng);
  for (std::size_t i = 0; i < ps.size(); ++i) ps2[i + ps.size()].value = ps[i].value;
  const Tensor x = random_tensor({2, 3, 5}, rng);
  const Tensor s = seq.forward(ps, x);
  const Tensor l = last_layer.forward(ps2, x);
  REQUIRE(l.shape() == std::vector<std::size_t>{2, 8});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t h = 0; h < 4; ++h) {
      CHECK(l.at(n, h) == s.at(n, h, 4));
      CHECK(l.at(n, 4 + h) == s.at(n, 4 + h, 0));
    }
}

TEST_CASE("loss values") {
  const Tensor z({1, 2}, {0.0, 100.0});
  const Tensor y({1, 2}, {1.0, 1.0});
  CHECK(bce_with_logits(z, y).value == doctest::Approx(std::log(2.0) / 2));
  CHECK(std::isfinite(bce_with_logits(Tensor({1, 1}, {-800.0}), Tensor({1, 1}, {1.0})).value));
  CHECK(softmax_cross_entropy(Tensor({1, 2}, {0.0, 0.0}), Tensor({1, 2}, {0.0, 1.0})).value ==
        doctest::Approx(std::log(2.0)));
  CHECK(mse(Tensor({2}, {1, 3}), Tensor({2}, {0, 0})).value == doctest::Approx(5.0));
}

TEST_CASE("adam") {
  ParamStore ps;
  const auto a = ps.add("a", {2});
  const auto frozen = ps.add("f", {1});
  ps[a].value = {1.0, -1.0};
  ps[frozen].value = {4.0};
  ps.set_trainable("f", false);
  ps[a].grad = {0.5, -3.0};
  ps[frozen].grad = {1.0};
  AdamState st;
  adam_step(ps, st, 0.1);
  CHECK(ps[a].value[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(ps[a].value[1] == doctest::Approx(-0.9).epsilon(1e-6));
  CHECK(ps[frozen].value[0] == 4.0);
  CHECK(ps[a].grad == std::vector<double>{0, 0});

  // converges on a quadratic
  for (int i = 0; i < 2000; ++i) {
    for (std::size_t k = 0; k < 2; ++k) ps[a].grad[k] = 2 * (ps[a].value[k] - 3.0);
    adam_step(ps, st, 0.05);
  }
  CHECK(ps[a].value[0] == doctest::Approx(3.0).epsilon(1e-3));

  const auto before = ps[a].value;
  ps[a].grad = {std::nan(""), 0.0};
  CHECK_THROWS_AS(adam_step(ps, st, 0.1), DivergenceError);
  CHECK(ps[a].value == before);
  CHECK_THROWS_AS(adam_step(ps, st, 0.0), ConfigError);
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 100, 1e-3, 1e-5) == doctest::Approx(1e-3));
  CHECK(cosine_lr(100, 100, 1e-3, 1e-5) == doctest::Approx(1e-5));
  CHECK(cosine_lr(50, 100, 1e-3, 1e-5) == doctest::Approx((1e-3 + 1e-5) / 2));
  for (std::uint64_t s = 1; s <= 100; ++s) CHECK(cosine_lr(s, 100, 1e-3, 1e-5) <= cosine_lr(s - 1, 100, 1e-3, 1e-5));
}
