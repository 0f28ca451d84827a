#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "roomsense/error.hpp"
#include "roomsense/metrics.hpp"
#include "roomsense/pca.hpp"
#include "roomsense/search.hpp"
#include "roomsense/timeline.hpp"
#include "roomsense/train.hpp"
#include "support/experiment.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace roomsense;
using roomsense::testing::random_tensor;

namespace {

const testing::Prepared& small_experiment() {
  static const testing::Prepared p = [] {
    ScenarioConfig c;
    c.duration = 6000;
    testing::PrepareOptions o;
    return testing::prepare(generate_frame(c), o);
  }();
  return p;
}

nlohmann::json without_meta(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("meta");
    for (auto& [k, v] : j.items()) v = without_meta(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_meta(v);
  }
  return j;
}

}  // namespace

TEST_CASE("early stopper contract") {
  EarlyStopper s(1, 0.0);
  CHECK(s.update(1.0));
  CHECK(!s.update(2.0));
  CHECK(!s.should_stop());
  CHECK(!s.update(3.0));
  CHECK(s.should_stop());
  CHECK(s.best() == 1.0);

  EarlyStopper d(2, 0.1);
  CHECK(d.update(1.0));
  CHECK(!d.update(0.95));  // within min_delta
  CHECK(d.update(0.85));
}

TEST_CASE("desk FCN separates the synthetic classes") {
  const auto& p = small_experiment();
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 7;
  cfg.early_stopping = false;
  Fcn m(FcnConfig::optimized(p.train.channels.size()), 7);
  const auto h = train_classifier(m, p.train, p.valid, cfg);
  CHECK(h.size() == 10);
  CHECK(h.epochs.back().valid_accuracy >= 0.9);
  CHECK(h.epochs.back().train_loss < h.epochs.front().train_loss);
}

TEST_CASE("training is deterministic and restores the best epoch") {
  const auto& p = small_experiment();
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.seed = 3;
  cfg.patience = 1;
  cfg.lr_max = 0.05;  // noisy enough to trigger early stopping
  LstmClassifier a({p.train.channels.size(), 6, false, 0.2, 2, HeadMode::multi_label}, 1);
  LstmClassifier b = a;
  const auto ha = train_classifier(a, p.train, p.valid, cfg);
  const auto hb = train_classifier(b, p.train, p.valid, cfg);
  CHECK(without_meta(nlohmann::json(ha)) == without_meta(nlohmann::json(hb)));
  for (std::size_t i = 0; i < a.params().size(); ++i) CHECK(a.params()[i].value == b.params()[i].value);

  REQUIRE(ha.best_epoch >= 1);
  double best = 1e300;
  for (const auto& e : ha.epochs) best = std::min(best, e.valid_loss);
  const Tensor vy = targets_for(a, p.valid.y, 0);
  CHECK(evaluate_loss(a, p.valid.x, vy, Objective::bce) == ha.best_valid_loss());
  CHECK(ha.best_valid_loss() <= best + cfg.min_delta);

  nlohmann::json j = ha;
  const auto back = j.get<History>();
  CHECK(nlohmann::json(back) == j);
  CHECK(history_csv(ha).find("epoch,train_loss") == 0);
}

TEST_CASE("single-label heads train one network per class") {
  const auto& p = small_experiment();
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto t = fit_classifier(
      [&](std::uint64_t seed) { return build_fcn({p.train.channels.size(), {4}, {3}, 2, HeadMode::single_label}, seed); },
      p.train, p.valid, cfg);
  CHECK(t.classifier.members.size() == 2);
  CHECK(t.histories.size() == 2);
  const Tensor pr = t.classifier.predict(p.test.x);
  CHECK(pr.shape() == std::vector<std::size_t>{p.test.count(), 2});
}

TEST_CASE("autoencoder identity sanity") {
  Tensor x({8, 2, 3});
  for (std::size_t n = 0; n < 8; ++n)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t t = 0; t < 3; ++t) x.at(n, c, t) = (static_cast<double>(n) - 3.5) / 4.0 * (c ? -1.0 : 1.0);
  WindowSet w;
  w.x = x;
  w.channels = {"a", "b"};
  w.start_times.assign(8, 0);
  w.y = BinaryMatrix(8, 0);
  Autoencoder ae({2, {8}, 6, 3}, 5);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 8;
  cfg.lr_max = 1e-2;
  cfg.schedule = Schedule::constant;
  cfg.seed = 5;
  const auto h = train_autoencoder(ae, w, cfg, 0.0);
  CHECK(h.size() == 300);
  CHECK(h.epochs.back().train_loss < 1e-3);
}

TEST_CASE("metrics") {
  Tensor perfect({3, 2}, {1, 0, 0, 1, 1, 1});
  BinaryMatrix y(3, 2);
  y.data = {1, 0, 0, 1, 1, 1};
  const auto m = metrics_from(confusion(perfect, y, {"person", "window_open"}));
  for (const auto& c : m.classes) {
    CHECK(c.precision == 1.0);
    CHECK(c.recall == 1.0);
    CHECK(c.f1 == 1.0);
  }
  CHECK(m.accuracy == 1.0);

  ConfusionMatrix cm{{"person"}, {{2, 1, 1, 6}}};
  const auto h = metrics_from(cm);
  CHECK(h.classes[0].precision == doctest::Approx(2.0 / 3));
  CHECK(h.classes[0].recall == doctest::Approx(2.0 / 3));
  CHECK(h.classes[0].f1 == doctest::Approx(2.0 / 3));
  CHECK(cm.counts[0].total() == 10);

  BinaryMatrix none(2, 1);
  const auto z = metrics_from(confusion(Tensor({2, 1}, {0.1, 0.7}), none, {"window_open"}));
  CHECK(z.classes[0].recall == 0.0);
  CHECK(z.warnings.size() == 1);

  // permutation invariance and count consistency
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.below(30);
    Tensor p({n, 2});
    BinaryMatrix t(n, 2);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = rng.uniform();
      t.data[i] = rng.bernoulli(0.4);
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const auto a = confusion(p, t, {"a", "b"});
    const auto b = confusion(p.gather(perm), t.gather(perm), {"a", "b"});
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(a.counts[k] == b.counts[k]);
      CHECK(a.counts[k].total() == n);
      CHECK(metrics_from(a).f1(k) == metrics_from(b).f1(k));
    }
  }
}

TEST_CASE("smoothing examples") {
  CHECK(smooth_decisions({0, 0, 1, 0, 0}, 2) == std::vector<int>{0, 0, 0, 0, 0});
  CHECK(smooth_decisions({0, 1, 1, 0, 0}, 2) == std::vector<int>{0, 1, 1, 0, 0});
  CHECK(smooth_decisions({1, 1, 0, 1, 1, 0, 0, 0}, 2) == std::vector<int>{1, 1, 1, 1, 1, 0, 0, 0});
  CHECK(smooth_decisions({0, 1, 0, 1, 0}, 2) == std::vector<int>{0, 0, 0, 0, 0});
  CHECK(smooth_decisions({1, 0, 1}, 1) == std::vector<int>{1, 0, 1});
  CHECK(smooth_decisions({-1, 0, 1, 0, -1}, 3) == std::vector<int>{-1, 0, 0, 0, -1});
  CHECK(smooth_decisions({0, -1, 0}, 3) == std::vector<int>{0, -1, 0});
  CHECK(smooth_decisions({1, -1, 1, 0}, 3) == std::vector<int>{1, -1, 1, 0});
  CHECK(smooth_decisions({}, 3).empty());
  CHECK_THROWS_AS(smooth_decisions({0}, 0), ConfigError);
}

TEST_CASE("smoothing matches the brute-force oracle and is idempotent") {
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng.below(40), w = 1 + rng.below(6);
    std::vector<int> d(n);
    for (int& v : d) v = rng.bernoulli(0.1) ? -1 : static_cast<int>(rng.bernoulli(0.5));
    const auto s = smooth_decisions(d, w);
    CHECK(s == oracle::smooth(d, w));
    CHECK(smooth_decisions(s, w) == s);
    if (w == 1) CHECK(s == d);
  }
}

TEST_CASE("prediction timeline") {
  SensorFrame f;
  for (int i = 0; i < 10; ++i) f.timestamps.push_back(i * 120);
  f.channels = {{"a", {}}, {"b", {}}};
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    f.channels[0].values.push_back(rng.normal());
    f.channels[1].values.push_back(rng.normal());
  }
  const auto scaler = fit_scaler(ScalerKind::standard, f);
  Classifier c;
  auto lstm = std::make_unique<LstmClassifier>(LstmConfig{2, 3, false, 0.0, 2, HeadMode::multi_label}, 1);
  for (auto& b : lstm->params().buffers())
    if (b.name.rfind("lstm", 0) == 0) std::fill(b.value.begin(), b.value.end(), 0.0);
  c.members.push_back(std::move(lstm));

  const auto t = predict_timeline(c, f, {7, 1, LabelPosition::first}, scaler, {"person", "window_open"});
  CHECK(t.predicted() == 4);
  for (std::size_t i = 0; i < 10; ++i) {
    if (i < 4) {
      CHECK(t.decision[0][i] != kNoPrediction);
      CHECK(t.probability[0][i] == t.probability[0][0]);
    } else {
      CHECK(t.decision[0][i] == kNoPrediction);
    }
  }
  const auto last = predict_timeline(c, f, {7, 1, LabelPosition::last}, scaler, {"person", "window_open"});
  CHECK(last.decision[1][5] == kNoPrediction);
  CHECK(last.decision[1][6] != kNoPrediction);

  const auto short_track = predict_timeline(c, f.slice(0, 5), {7, 1, LabelPosition::first}, scaler, {"person", "window_open"});
  CHECK(short_track.predicted() == 0);
  CHECK(!short_track.warnings.empty());

  nlohmann::json j = t;
  CHECK(nlohmann::json(j.get<PredictionTrack>()) == j);
  CHECK(track_csv(t).find("timestamp,person_probability,person_decision") == 0);
}

TEST_CASE("timeline decisions agree with evaluate") {
  const auto& p = small_experiment();
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto t = fit_classifier({{"kind", "fcn"}, {"config", FcnConfig::optimized(p.train.channels.size())}}, p.train, p.valid, cfg);
  const auto track = predict_timeline(t.classifier, p.test_frame, {7, 1, LabelPosition::first}, p.scaler, testing::kClasses);
  const auto probs = t.classifier.predict(p.test.x);
  CHECK(track.predicted() == p.test.count());
  std::size_t w = 0;
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (track.decision[0][i] == kNoPrediction) continue;
    CHECK(track.timestamps[i] == p.test.start_times[w]);
    for (std::size_t k = 0; k < 2; ++k) CHECK(track.decision[k][i] == (probs.at(w, k) >= 0.5 ? 1 : 0));
    ++w;
  }
}

TEST_CASE("pca examples") {
  Tensor line({5, 2});
  for (std::size_t i = 0; i < 5; ++i) line.at(i, 0) = line.at(i, 1) = static_cast<double>(i);
  const auto m = pca_fit(line);
  CHECK(std::abs(m.explained[0] - 1.0) < 1e-9);
  CHECK(std::abs(m.components[0][0] - std::sqrt(0.5)) < 1e-9);

  Rng rng(1);
  Tensor iso({10000, 2});
  for (std::size_t i = 0; i < iso.size(); ++i) iso[i] = rng.normal();
  const auto mi = pca_fit(iso);
  CHECK(std::abs(mi.explained[0] - 0.5) <= 0.05);
  CHECK(std::abs(mi.explained[1] - 0.5) <= 0.05);
  const Tensor mean_point({1, 2}, {mi.mean[0], mi.mean[1]});
  const Tensor origin = pca_project(mi, mean_point);
  CHECK(std::abs(origin[0]) < 1e-12);
  CHECK(std::abs(origin[1]) < 1e-12);

  CHECK_THROWS_AS(pca_fit(Tensor({4, 2}, {1, 1, 1, 1, 1, 1, 1, 1})), DegenerateError);
  CHECK_THROWS_AS(pca_fit(Tensor({2, 2}, {1, 2, 3, 4})), ShapeError);
}

TEST_CASE("pca matches a dense eigensolver") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.below(5), n = 20 + rng.below(60);
    // well-separated spectrum along a random rotation
    Tensor x({n, d});
    std::vector<double> scale(d);
    for (std::size_t j = 0; j < d; ++j) scale[j] = std::pow(2.0, static_cast<double>(d - j));
    const Tensor rot = random_tensor({d, d}, rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < d; ++k) s += rng.normal() * scale[k] * rot.at(k, j);
        x.at(i, j) = s + 3.0;
      }
    const auto got = pca_fit(x);
    const auto want = oracle::pca(x);
    const double gap = want.explained[0] - want.explained[1];
    if (gap < 0.05 || want.explained[1] - (d > 2 ? oracle::pca(x, 3).explained[2] : 0.0) < 0.05) continue;
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(std::abs(got.explained[c] - want.explained[c]) < 1e-9);
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(got.components[c][j] - want.components[c][j]) < 1e-9);
    }
    double dot = 0, n0 = 0, n1 = 0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += got.components[0][j] * got.components[1][j];
      n0 += got.components[0][j] * got.components[0][j];
      n1 += got.components[1][j] * got.components[1][j];
    }
    CHECK(std::abs(dot) < 1e-9);
    CHECK(std::abs(n0 - 1) < 1e-9);
    CHECK(std::abs(n1 - 1) < 1e-9);
    const Tensor proj = pca_project(got, x);
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0;
      for (std::size_t i = 0; i < n; ++i) mean += proj.at(i, c);
      CHECK(std::abs(mean / static_cast<double>(n)) < 1e-9);
    }
  }
}

TEST_CASE("random search") {
  SearchSpace space;
  space.grids = {{"a", {1, 2, 3}}, {"b", {0.5, 1.5}}};
  const auto objective = [](const nlohmann::json& s, std::uint64_t) {
    const double a = s.at("a").get<double>(), b = s.at("b").get<double>();
    return TrialOutcome{-(a - 2) * (a - 2) - (b - 1.5) * (b - 1.5), {}};
  };
  const auto one = random_search(space, 1, 5, objective);
  CHECK(one.trials.size() == 1);
  CHECK(one.best == 0);

  const auto many = random_search(space, 60, 5, objective);
  std::set<std::string> seen;
  for (const auto& t : many.trials) {
    CHECK(std::find(space.grids[0].second.begin(), space.grids[0].second.end(), t.sample["a"]) != space.grids[0].second.end());
    CHECK(std::find(space.grids[1].second.begin(), space.grids[1].second.end(), t.sample["b"]) != space.grids[1].second.end());
    seen.insert(t.sample.dump());
  }
  REQUIRE(seen.size() == space.combinations());
  // brute-force grid maximum
  double best = -1e300;
  for (const auto& a : space.grids[0].second)
    for (const auto& b : space.grids[1].second) best = std::max(best, objective({{"a", a}, {"b", b}}, 0).score);
  CHECK(many.best_trial().score == best);
  for (std::size_t i = 0; i < many.best; ++i) CHECK(many.trials[i].score < best);

  const auto parallel = random_search(space, 60, 5, objective, 4);
  CHECK(without_meta(nlohmann::json(parallel)) == without_meta(nlohmann::json(many)));

  SearchSpace empty;
  empty.grids = {{"a", {}}};
  CHECK_THROWS_AS(random_search(empty, 3, 1, objective), ConfigError);

  const auto fcn = fcn_search_space();
  CHECK(fcn.grids.size() == 2);
  CHECK(fcn.grids[0].second.size() == 7);
  const auto lstm = lstm_search_space();
  CHECK(lstm.grids[0].second.size() == 11);
  CHECK(lstm.grids[1].second.size() == 5);
  CHECK(apply_sample(nlohmann::json(FcnConfig{}), {{"filters.1", 12}})["filters"][1] == 12);
  CHECK_THROWS_AS(apply_sample(nlohmann::json(FcnConfig{}), {{"filterz", 12}}), ConfigError);
}

TEST_CASE("classifier tuning") {
  const auto& p = small_experiment();
  TrainConfig cfg;
  cfg.epochs = 1;
  const nlohmann::json arch = {{"kind", "fcn"}, {"config", FcnConfig::optimized(p.train.channels.size())}};
  const auto r = tune_classifier(arch, fcn_search_space(), p.train, p.valid, cfg, 2, 11, 2);
  CHECK(r.trials.size() == 2);
  for (const auto& t : r.trials) {
    CHECK(t.class_f1.size() == 2);
    CHECK(t.score == doctest::Approx((t.class_f1[0] + t.class_f1[1]) / 2));
  }
}
