#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "roomsense/error.hpp"
#include "roomsense/loss.hpp"
#include "roomsense/models.hpp"
#include "roomsense/optim.hpp"
#include "support/gradient_suite.hpp"

using namespace roomsense;
using roomsense::testing::random_tensor;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

InceptionConfig toy_inception(std::size_t depth = 6) {
  InceptionConfig c;
  c.in_channels = 3;
  c.filters = 2;
  c.bottleneck = 2;
  c.kernels = {3, 5, 7};
  c.depth = depth;
  c.ensemble = 1;
  return c;
}

// Batch-equals-rows in eval mode, after one train pass initialises batch norm.
void check_batch_invariance(Model& m, const Tensor& x) {
  m.forward(x, Mode::train);
  const Tensor whole = m.forward(x, Mode::eval);
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    std::vector<std::size_t> row = {i};
    const Tensor one = m.forward(x.gather(row), Mode::eval);
    for (std::size_t j = 0; j < one.size(); ++j) CHECK(std::abs(one[j] - whole[i * one.size() + j]) < 1e-9);
  }
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(param_count(Fcn(FcnConfig::minimized(9), 1)) == 2418);
  CHECK(param_count(Fcn(FcnConfig::optimized(9), 1)) == 2306);
  CHECK(param_count(LstmClassifier({8, 100, false, 0.0, 2, HeadMode::multi_label}, 1)) == 43802);
  CHECK(param_count(LstmClassifier({8, 100, true, 0.0, 2, HeadMode::multi_label}, 1)) == 87602);
  Autoencoder ae({17, {16, 12}, 10, 7}, 1);
  EncoderClassifier head(ae, {10, 100, 2, HeadMode::multi_label}, 2);
  CHECK(param_count(head) == 1302);
  CHECK(head.params().parameter_count() > 1302);
  CHECK_THROWS_AS(EncoderClassifier(ae, {2, 100, 2, HeadMode::multi_label}, 2), ConfigError);
}

TEST_CASE("end-to-end gradients for every architecture") {
  for (const auto& [name, rep] : testing::model_gradient_suite(21)) {
    INFO(name, " max_rel=", rep.max_rel, " checked=", rep.checked);
    CHECK(rep.ok());
  }
}

TEST_CASE("fcn shapes and variable length") {
  Rng rng(1);
  Fcn def(FcnConfig{}, 3);
  CHECK(def.forward(random_tensor({4, 9, 15}, rng), Mode::train).shape() == std::vector<std::size_t>{4, 2});
  Fcn m(FcnConfig::minimized(9), 4);
  for (std::size_t l : {7, 10, 15}) {
    CHECK(m.forward(random_tensor({2, 9, l}, rng), Mode::train).shape() == std::vector<std::size_t>{2, 2});
    CHECK(m.feature_map_length() == l);
  }
  CHECK_THROWS_AS(m.forward(random_tensor({2, 8, 7}, rng), Mode::train), ShapeError);
  check_batch_invariance(m, random_tensor({5, 9, 7}, rng));
}

TEST_CASE("lstm classifier") {
  Rng rng(2);
  LstmClassifier m({3, 4, false, 0.3, 2, HeadMode::multi_label}, 5);
  for (auto& b : m.params().buffers())
    if (b.name.rfind("lstm", 0) == 0) std::fill(b.value.begin(), b.value.end(), 0.0);
  const Tensor out = m.forward(random_tensor({3, 3, 7}, rng), Mode::eval);
  const auto& bias = m.params()[m.dense().bias()].value;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 2; ++k) CHECK(out.at(i, k) == bias[k]);
  LstmClassifier bi({3, 4, true, 0.0, 2, HeadMode::multi_label}, 5);
  bi.forward(random_tensor({2, 3, 5}, rng), Mode::eval);
  CHECK(bi.features().dim(1) == 8);
  check_batch_invariance(bi, random_tensor({4, 3, 5}, rng));
}

TEST_CASE("inception structure") {
  Rng rng(3);
  InceptionNet net(toy_inception(), 7);
  CHECK(net.modules() == 6);
  const Tensor x = random_tensor({3, 3, 12}, rng);
  net.forward(x, Mode::train);
  CHECK(net.block_output(0).dim(1) == 4 * 2);
  CHECK(net.forward(random_tensor({2, 3, 7}, rng), Mode::train).shape() == std::vector<std::size_t>{2, 2});
  check_batch_invariance(net, x);

  // zeroed modules leave only the identity shortcut of the second block
  for (std::size_t m = 3; m < 6; ++m)
    for (auto& b : net.params().buffers())
      if (b.name.rfind(InceptionNet::module_prefix(m) + ".", 0) == 0 && !b.state && b.name.find(".bn") == std::string::npos)
        std::fill(b.value.begin(), b.value.end(), 0.0);
  net.forward(x, Mode::train);
  CHECK(max_abs_diff(net.block_output(1), net.block_input(1)) == 0.0);

  InceptionConfig bad = toy_inception(4);
  CHECK_THROWS_AS(InceptionNet(bad, 1), ConfigError);
}

TEST_CASE("ensemble of one equals the member") {
  Rng rng(4);
  Classifier c;
  c.members.push_back(build_inception(toy_inception(3), 9));
  const Tensor x = random_tensor({3, 3, 8}, rng);
  c.members[0]->forward(x, Mode::train);
  const Tensor p = c.predict(x);
  auto copy = c.members[0]->clone();
  CHECK(max_abs_diff(p, predict_proba(*copy, x)) == 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p.at(i, 0) + p.at(i, 1) - 1.0) > 1e-6);
}

TEST_CASE("autoencoder shapes and training") {
  Rng rng(5);
  for (std::size_t latent : {2, 10, 16}) {
    Autoencoder ae({17, {12, 8}, latent, 7}, 1);
    const Tensor x = random_tensor({3, 17, 7}, rng);
    CHECK(ae.encode(x).shape() == std::vector<std::size_t>{3, latent});
    CHECK(ae.forward(x, Mode::eval).shape() == x.shape());
  }

  // 64 structured windows: per-window amplitude and phase on shared channel profiles
  Tensor x({64, 17, 7});
  for (std::size_t n = 0; n < 64; ++n) {
    const double a = rng.uniform(-1, 1), phase = rng.uniform(0, 3);
    for (std::size_t c = 0; c < 17; ++c)
      for (std::size_t t = 0; t < 7; ++t) x.at(n, c, t) = a * std::sin(0.4 * c + 0.3 * t + phase);
  }
  Autoencoder ae({17, {32, 16}, 10, 7}, 3);
  AdamState st;
  std::vector<double> losses;
  for (int step = 0; step < 200; ++step) {
    const auto l = mse(ae.forward(x, Mode::train), x);
    ae.backward(l.grad);
    adam_step(ae.params(), st, 1e-2);
    losses.push_back(l.value);
  }
  const auto smoothed = [&](std::size_t end) {
    double s = 0;
    for (std::size_t i = end - 5; i < end; ++i) s += losses[i];
    return s / 5;
  };
  CHECK(smoothed(200) <= 0.5 * smoothed(5));
}

TEST_CASE("frozen encoder stays bit-identical") {
  Rng rng(6);
  Autoencoder ae({5, {6}, 3, 5}, 1);
  EncoderClassifier m(ae, {0, 8, 2, HeadMode::multi_label}, 2);
  std::vector<std::vector<double>> before;
  for (const auto& b : m.params().buffers())
    if (b.name.rfind("encoder.", 0) == 0) before.push_back(b.value);
  const Tensor x = random_tensor({8, 5, 5}, rng);
  Tensor y({8, 2});
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.bernoulli(0.5);
  AdamState st;
  for (int step = 0; step < 100; ++step) {
    const auto l = bce_with_logits(m.forward(x, Mode::train), y);
    m.backward(l.grad);
    adam_step(m.params(), st, 1e-2);
  }
  std::size_t i = 0;
  for (const auto& b : m.params().buffers())
    if (b.name.rfind("encoder.", 0) == 0) CHECK(b.value == before[i++]);
  CHECK(i == before.size());
  // encoder weights came from the trained autoencoder
  CHECK(m.params().find("encoder.lstm0.w_input")->value == ae.params().find("encoder.lstm0.w_input")->value);
}

TEST_CASE("multi-label classes have independent gradients") {
  Rng rng(7);
  const Tensor z = random_tensor({6, 2}, rng);
  Tensor y({6, 2});
  for (std::size_t i = 0; i < 6; ++i) {
    y.at(i, 0) = static_cast<double>(i % 2);
    y.at(i, 1) = static_cast<double>(i < 3);
  }
  Tensor permuted = y;
  for (std::size_t i = 0; i < 6; ++i) permuted.at(i, 1) = y.at(5 - i, 1);
  const auto a = bce_with_logits(z, y), b = bce_with_logits(z, permuted);
  for (std::size_t i = 0; i < 6; ++i) CHECK(a.grad.at(i, 0) == b.grad.at(i, 0));
}

TEST_CASE("checkpoints round-trip exactly") {
  Rng rng(8);
  const auto dir = std::filesystem::temp_directory_path() / "roomsense_ckpt_test";
  std::filesystem::create_directories(dir);
  Fcn m(FcnConfig::minimized(4), 11);
  m.forward(random_tensor({3, 4, 7}, rng), Mode::train);
  save_checkpoint((dir / "fcn").string(), m, {11, 42});
  auto loaded = load_model((dir / "fcn").string());
  CHECK(loaded->fingerprint() == m.fingerprint());
  for (std::size_t i = 0; i < m.params().size(); ++i) CHECK(loaded->params()[i].value == m.params()[i].value);
  Fcn other(FcnConfig::optimized(4), 11);
  CHECK_THROWS_AS(load_checkpoint((dir / "fcn").string(), other), SchemaError);

  Classifier c;
  c.mode = HeadMode::single_label;
  for (int k = 0; k < 2; ++k)
    c.members.push_back(build_fcn({4, {3}, {3}, 2, HeadMode::single_label}, 20 + k));
  const Tensor x = random_tensor({3, 4, 7}, rng);
  for (auto& mm : c.members) mm->forward(x, Mode::train);
  save_classifier((dir / "clf").string(), c);
  const Classifier back = load_classifier((dir / "clf").string());
  CHECK(max_abs_diff(back.predict(x), c.predict(x)) == 0.0);
  CHECK(back.classes() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("architecture documents") {
  const nlohmann::json bad = {{"kind", "fcn"}, {"config", {{"filterz", {1}}}}};
  CHECK_THROWS_AS(build_model(bad, 1), ConfigError);
  Fcn m(FcnConfig::optimized(5), 1);
  CHECK(build_model(m.architecture(), 1)->fingerprint() == m.fingerprint());
  CHECK(build_model(m.architecture(), 1)->params()[0].value == m.params()[0].value);
}
