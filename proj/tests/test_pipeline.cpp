#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "doctest.h"
#include "roomsense/error.hpp"
#include "roomsense/pipeline.hpp"
#include "roomsense/rng.hpp"
#include "support/oracles.hpp"

using namespace roomsense;

namespace {

BinaryMatrix column(std::vector<int> v) {
  BinaryMatrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = static_cast<std::uint8_t>(v[i]);
  return m;
}

SensorFrame uniform_frame(std::size_t n, std::size_t channels = 2) {
  SensorFrame f;
  for (std::size_t i = 0; i < n; ++i) f.timestamps.push_back(static_cast<std::int64_t>(i) * 120);
  for (std::size_t c = 0; c < channels; ++c) {
    Channel ch{"c" + std::to_string(c), {}};
    for (std::size_t i = 0; i < n; ++i) ch.values.push_back(static_cast<double>(i * (c + 1)));
    f.channels.push_back(ch);
  }
  LabelSeries p{"person", {}};
  for (std::size_t i = 0; i < n; ++i) p.values.push_back(i % 3 == 0);
  f.labels.push_back(p);
  return f;
}

}  // namespace

TEST_CASE("undersample examples") {
  const auto s = undersample(column({0, 0, 0, 1, 0, 0, 0, 0}), 2);
  REQUIRE(s.size() == 1);
  CHECK(s[0].start == 1);
  CHECK(s[0].end == 6);
  CHECK(s[0].reason == SegmentReason::event_window);
  CHECK(undersample(column({0, 0, 0, 0}), 3).empty());
  const auto merged = undersample(column({0, 0, 1, 0, 0, 1, 0, 0}), 2);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].start == 0);
  CHECK(merged[0].end == 8);
  const auto k0 = undersample(column({1, 0, 1}), 0);
  CHECK(k0.size() == 2);
}

TEST_CASE("undersample matches the brute-force oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(60), k = rng.below(6);
    BinaryMatrix m(n, 2);
    for (auto& v : m.data) v = rng.bernoulli(0.05);
    const auto got = undersample(m, k);
    const auto want = oracle::undersample(m, k);
    REQUIRE(got.size() == want.size());
    std::size_t covered = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].start == want[i].first);
      CHECK(got[i].end == want[i].second);
      covered += got[i].length();
    }
    CHECK(covered <= n);
  }
}

TEST_CASE("split_on_gaps") {
  auto f = uniform_frame(30);
  const auto one = split_on_gaps(f);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Segment{0, 30, SegmentReason::full_frame});

  auto g = uniform_frame(10);
  for (std::size_t i = 5; i < 10; ++i) g.timestamps[i] += 2 * 86400;
  CHECK(split_on_gaps(g).size() == 2);

  auto h = uniform_frame(30);
  for (std::size_t i = 10; i < 30; ++i) h.timestamps[i] += 3600;
  for (std::size_t i = 20; i < 30; ++i) h.timestamps[i] += 3600;
  const auto three = split_on_gaps(h);
  REQUIRE(three.size() == 3);
  CHECK(three[0].end == 10);
  CHECK(three[1].start == 10);
  CHECK(three[1].end == 20);
  CHECK(three[2].start == 20);
  CHECK(three[2].reason == SegmentReason::time_gap_piece);
  CHECK_THROWS_AS(split_on_gaps(h, 0), ConfigError);
}

TEST_CASE("slide examples and oracle") {
  CHECK(slide({0, 10}, 7, 1).size() == 4);
  CHECK(slide({3, 9}, 7, 1).empty());
  CHECK(slide({0, 15}, 15, 1) == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(slide({0, 5}, 0, 1), ConfigError);
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t start = rng.below(20), len = rng.below(30), l = 1 + rng.below(10), stride = 1 + rng.below(4);
    std::vector<std::size_t> want;
    for (std::size_t s = start; s < start + len; ++s)
      if ((s - start) % stride == 0 && s + l <= start + len) want.push_back(s);
    CHECK(slide({start, start + len}, l, stride) == want);
  }
}

TEST_CASE("intersect keeps windows inside both segment lists") {
  const std::vector<Segment> gaps = {{0, 10, SegmentReason::time_gap_piece}, {10, 30, SegmentReason::time_gap_piece}};
  const std::vector<Segment> events = {{5, 15, SegmentReason::event_window}, {25, 40, SegmentReason::event_window}};
  const auto both = intersect(gaps, events);
  REQUIRE(both.size() == 3);
  CHECK(both[0] == Segment{5, 10, SegmentReason::event_window});
  CHECK(both[1] == Segment{10, 15, SegmentReason::event_window});
  CHECK(both[2] == Segment{25, 30, SegmentReason::event_window});
}

TEST_CASE("window_label examples") {
  const auto constant = column({1, 1, 1, 1, 1, 1, 1});
  for (auto p : {LabelPosition::first, LabelPosition::mean, LabelPosition::last})
    CHECK(window_label(constant, 0, 7, p) == std::vector<std::uint8_t>{1});
  CHECK(window_label(column({1, 1, 0, 0, 0, 0, 0}), 0, 7, LabelPosition::mean) == std::vector<std::uint8_t>{0});
  CHECK(window_label(column({1, 1, 1, 1, 0, 0, 0}), 0, 7, LabelPosition::mean) == std::vector<std::uint8_t>{1});
  CHECK(window_label(column({1, 1, 0, 0}), 0, 4, LabelPosition::mean) == std::vector<std::uint8_t>{1});
  CHECK(window_label(column({1, 0, 0, 1}), 0, 4, LabelPosition::first) == std::vector<std::uint8_t>{1});
  CHECK(window_label(column({0, 0, 0, 1}), 1, 3, LabelPosition::last) == std::vector<std::uint8_t>{1});
}

TEST_CASE("window_label matches the floating-point mean oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(20), k = 1 + rng.below(3);
    BinaryMatrix m(n, k);
    for (auto& v : m.data) v = rng.bernoulli(0.5);
    const std::size_t start = rng.below(n), len = 1 + rng.below(n - start);
    const auto got_mean = window_label(m, start, len, LabelPosition::mean);
    for (std::size_t c = 0; c < k; ++c) {
      double mean = 0.0;
      for (std::size_t t = start; t < start + len; ++t) mean += m(t, c);
      mean /= static_cast<double>(len);
      CHECK(got_mean[c] == (mean >= 0.5 ? 1 : 0));
      CHECK(window_label(m, start, len, LabelPosition::first)[c] == m(start, c));
      CHECK(window_label(m, start, len, LabelPosition::last)[c] == m(start + len - 1, c));
    }
    if (len == 1) {
      CHECK(window_label(m, start, 1, LabelPosition::first) == window_label(m, start, 1, LabelPosition::mean));
      CHECK(window_label(m, start, 1, LabelPosition::last) == window_label(m, start, 1, LabelPosition::mean));
    }
  }
}

TEST_CASE("build_windows stays inside segments") {
  auto f = uniform_frame(40);
  const std::vector<Segment> segs = {{0, 10}, {15, 22}, {30, 35}};
  const auto w = build_windows(f, segs, {7, 1, LabelPosition::first}, {"person"});
  CHECK(w.count() == 4 + 1 + 0);
  CHECK(w.x.shape() == std::vector<std::size_t>{5, 2, 7});
  CHECK(w.start_times.back() == 15 * 120);
  CHECK(w.x.at(4, 1, 0) == 30.0);  // channel 1 is 2*i, first row of last window is 15
  CHECK(w.y(4, 0) == 1);           // 15 % 3 == 0
  SensorFrame bad = f;
  bad.channels[0].values[3] = kMissing;
  CHECK_THROWS_AS(build_windows(bad, segs, {}, {"person"}), DegenerateError);
}

TEST_CASE("split_random sizes, determinism and oracle partition") {
  auto f = uniform_frame(16);
  const auto w = build_windows(f, {{0, 16}}, {7, 1, LabelPosition::first}, {"person"});
  REQUIRE(w.count() == 10);
  SplitSpec spec;
  spec.seed = 17;
  const auto parts = split_random(w, spec);
  CHECK(parts[0].count() == 7);
  CHECK(parts[1].count() == 2);
  CHECK(parts[2].count() == 1);
  CHECK(split_random_index(10, spec).train == split_random_index(10, spec).train);

  Rng rng(8);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 10 + rng.below(200);
    spec.seed = rng.next();
    const auto idx = split_random_index(n, spec);
    // oracle: independent Fisher-Yates over the same generator
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng oracle(spec.seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[oracle.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
    CHECK(idx.train == std::vector<std::size_t>(order.begin(), order.begin() + n_train));
    CHECK(idx.valid == std::vector<std::size_t>(order.begin() + n_train, order.begin() + n_train + n_valid));
    std::set<std::size_t> all(idx.train.begin(), idx.train.end());
    all.insert(idx.valid.begin(), idx.valid.end());
    all.insert(idx.test.begin(), idx.test.end());
    CHECK(all.size() == n);
    CHECK(idx.train.size() + idx.valid.size() + idx.test.size() == n);
  }
  CHECK_THROWS_AS(split_random_index(2, SplitSpec{}), SplitError);
  SplitSpec bad;
  bad.ratios = {0.8, 0.2, 0.0};
  CHECK_THROWS_AS(split_random_index(100, bad), ConfigError);
}

TEST_CASE("split_time separates before segmentation") {
  auto f = uniform_frame(11);
  CHECK_THROWS_AS(split_time(f, f.timestamps.front() - 1), ConfigError);
  CHECK_THROWS_AS(split_time(f, f.timestamps.front()), ConfigError);
  const auto [train, test] = split_time(f, f.timestamps[6]);
  CHECK(train.rows() == 6);
  CHECK(test.rows() == 5);

  const auto wa = build_windows(train, split_on_gaps(train), {3, 1, LabelPosition::first}, {"person"});
  const auto wb = build_windows(test, split_on_gaps(test), {3, 1, LabelPosition::first}, {"person"});
  std::set<std::int64_t> rows_a, rows_b;
  for (auto t : wa.start_times)
    for (int k = 0; k < 3; ++k) rows_a.insert(t + 120 * k);
  for (auto t : wb.start_times)
    for (int k = 0; k < 3; ++k) rows_b.insert(t + 120 * k);
  for (auto r : rows_a) CHECK(rows_b.count(r) == 0);
  for (auto r : rows_a) CHECK(r < f.timestamps[6]);
}

TEST_CASE("scalers") {
  SensorFrame f;
  f.timestamps = {0, 120, 240};
  f.channels = {{"a", {2, 4, 6}}};
  const auto s = fit_scaler(ScalerKind::standard, f);
  CHECK(s.offset[0] == doctest::Approx(4.0));
  CHECK(s.scale[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
  const auto mm = fit_scaler(ScalerKind::minmax, f);
  CHECK(mm.offset[0] == 2.0);
  CHECK(mm.offset[0] + mm.scale[0] == 6.0);
  SensorFrame flat = f;
  flat.channels[0].values = {3, 3, 3};
  CHECK_THROWS_AS(fit_scaler(ScalerKind::standard, flat), DegenerateError);
  CHECK_THROWS_AS(fit_scaler(ScalerKind::minmax, flat), DegenerateError);

  SensorFrame unseen = f;
  unseen.channels[0].values = {0, 10, 4};
  const auto t = transform(mm, unseen);
  CHECK(t.channels[0].values[0] < 0.0);
  CHECK(t.channels[0].values[1] > 1.0);

  SensorFrame other = f;
  other.channels[0].name = "b";
  CHECK_THROWS_AS(transform(s, other), SchemaError);
}

TEST_CASE("transform normalizes fit data and inverts") {
  Rng rng(6);
  SensorFrame f;
  for (int i = 0; i < 50; ++i) f.timestamps.push_back(i * 120);
  f.channels = {{"a", {}}, {"b", {}}};
  for (int i = 0; i < 50; ++i) {
    f.channels[0].values.push_back(rng.normal(400, 50));
    f.channels[1].values.push_back(rng.uniform(-3, 8));
  }
  const auto w = build_windows(f, {{0, 50}}, {5, 1, LabelPosition::first}, {});
  for (auto kind : {ScalerKind::standard, ScalerKind::minmax}) {
    const auto sc = fit_scaler(kind, w);
    const auto t = transform(sc, w);
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0, var = 0, lo = 1e9, hi = -1e9;
      const std::size_t n = t.count() * 5;
      for (std::size_t i = 0; i < t.count(); ++i)
        for (std::size_t k = 0; k < 5; ++k) {
          const double v = t.x.at(i, c, k);
          mean += v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < t.count(); ++i)
        for (std::size_t k = 0; k < 5; ++k) var += (t.x.at(i, c, k) - mean) * (t.x.at(i, c, k) - mean);
      var /= static_cast<double>(n);
      if (kind == ScalerKind::standard) {
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-9);
      } else {
        CHECK(lo >= 0.0);
        CHECK(hi <= 1.0);
      }
    }
    const auto back = inverse_transform(sc, t);
    for (std::size_t i = 0; i < w.x.size(); ++i) CHECK(std::abs(back.x[i] - w.x[i]) < 1e-9);
    nlohmann::json j = sc;
    CHECK(j.get<ScalerParams>() == sc);
  }
}

TEST_CASE("window container round-trips") {
  auto f = uniform_frame(20);
  f.channels[0].values[3] = 0.1 + 0.2;  // not exactly representable in short decimal
  auto w = build_windows(f, {{0, 20}}, {7, 2, LabelPosition::mean}, {"person"});
  w = transform(fit_scaler(ScalerKind::standard, w), w);
  const auto dir = std::filesystem::temp_directory_path() / "roomsense_windows_test";
  std::filesystem::create_directories(dir);
  save_windows((dir / "w").string(), w);
  CHECK(load_windows((dir / "w").string()) == w);
  std::filesystem::remove_all(dir);
}
