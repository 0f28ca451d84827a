#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "roomsense/io.hpp"
#include "roomsense/pipeline.hpp"
#include "roomsense/synth.hpp"

namespace roomsense::testing {

inline const std::vector<std::string> kClasses = {"person", "window_open"};

struct Prepared {
  FeatureSet features;
  ScalerParams scaler;
  WindowSet train, valid, test;
  WindowSet raw_train, raw_valid, raw_test;  // before scaling
  SensorFrame test_frame;  // cleaned, time-separated tail on the selected channels
};

struct PrepareOptions {
  std::size_t context = kDefaultContext;  // 0 keeps the full unbalanced train side
  ScalerKind scaler = ScalerKind::standard;
  WindowSpec window{};
  double test_fraction = 0.2;
  double valid_fraction = 0.2;
  std::uint64_t seed = 7;
  bool select = true;  // false keeps every channel
};

// generate -> clean -> binarize -> time split -> select features on the
// train side -> segment (gaps, under-sampling) -> windows -> holdout -> scale
inline Prepared prepare(const SensorFrame& raw, const PrepareOptions& o) {
  const SensorFrame frame = binarize_person(interpolate_missing(raw));
  const auto cut_row = static_cast<std::size_t>(static_cast<double>(frame.rows()) * (1.0 - o.test_fraction));
  auto [train_side, test_side] = split_time(frame, frame.timestamps[cut_row]);

  std::vector<std::string> vars = train_side.channel_names();
  vars.insert(vars.end(), kClasses.begin(), kClasses.end());
  Prepared p;
  if (o.select)
    p.features = select_features(pearson_matrix(train_side, vars), kDefaultPairThreshold, kClasses);
  else
    p.features.names = train_side.channel_names();
  train_side = train_side.select_channels(p.features.names);
  p.test_frame = test_side.select_channels(p.features.names);

  auto segments = split_on_gaps(train_side);
  if (o.context > 0) segments = intersect(segments, undersample(label_matrix(train_side, kClasses), o.context));
  std::tie(p.raw_train, p.raw_valid) =
      holdout(build_windows(train_side, segments, o.window, kClasses), o.valid_fraction, o.seed);
  p.raw_test = build_windows(p.test_frame, split_on_gaps(p.test_frame), o.window, kClasses);
  p.scaler = fit_scaler(o.scaler, p.raw_train);
  p.train = transform(p.scaler, p.raw_train);
  p.valid = transform(p.scaler, p.raw_valid);
  p.test = transform(p.scaler, p.raw_test);
  return p;
}

inline std::string source_path(const std::string& relative) { return std::string(ROOMSENSE_SOURCE_DIR) + "/" + relative; }

inline ScenarioConfig bundled_scenario() {
  return io::read_json(source_path("scenarios/bundled.json")).get<ScenarioConfig>();
}

}  // namespace roomsense::testing
