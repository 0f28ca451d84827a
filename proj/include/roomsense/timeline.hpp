#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "roomsense/metrics.hpp"
#include "roomsense/models.hpp"
#include "roomsense/pipeline.hpp"

namespace roomsense {

/// Decision value of a timestamp no window was assigned to.
inline constexpr int kNoPrediction = -1;

/// Per-timestamp predictions. probability[k][i] is NaN and decision[k][i]
/// is kNoPrediction where no window's label position lands on row i.
struct PredictionTrack {
  std::vector<std::int64_t> timestamps;
  std::vector<std::string> classes;
  std::vector<std::vector<double>> probability;
  std::vector<std::vector<int>> decision;
  double threshold = kDefaultThreshold;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return timestamps.size(); }
  std::size_t predicted() const;
};

/// Slides stride-1 windows over the gap-split segments of `frame` (scaled
/// with `scaler`, restricted to its channels) and places each window's
/// prediction at its label-position timestamp.
PredictionTrack predict_timeline(const Classifier& classifier, const SensorFrame& frame, const WindowSpec& spec,
                                 const ScalerParams& scaler, const std::vector<std::string>& classes,
                                 double threshold = kDefaultThreshold, std::int64_t max_gap = kDefaultMaxGap);

/// Flips maximal runs shorter than w whose two flanking runs carry the same
/// decision to that decision, shortest run first (leftmost on ties), until
/// none remain. kNoPrediction entries are never flipped and never count as
/// an agreeing flank.
std::vector<int> smooth_decisions(const std::vector<int>& decisions, std::size_t w);
/// smooth_decisions applied to every class; probabilities are kept.
PredictionTrack smooth(const PredictionTrack& track, std::size_t w);

void to_json(nlohmann::json& j, const PredictionTrack& t);
void from_json(const nlohmann::json& j, PredictionTrack& t);
/// timestamp, then <class>_probability and <class>_decision per class; empty
/// cells where there is no prediction.
std::string track_csv(const PredictionTrack& t);

}  // namespace roomsense
