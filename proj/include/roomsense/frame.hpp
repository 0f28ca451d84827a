#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace roomsense {

/// Nominal sampling period of the sensors, in seconds.
inline constexpr std::int64_t kSamplePeriod = 120;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

inline constexpr std::string_view kPersonLabel = "person";
inline constexpr std::string_view kWindowLabel = "window_open";

/// The seventeen channels an air-quality device reports, in canonical order.
const std::vector<std::string>& canonical_channels();

struct Channel {
  std::string name;
  std::vector<double> values;  // NaN marks a missing reading
};

struct LabelSeries {
  std::string name;
  std::vector<std::int64_t> values;
};

/// Timestamped multichannel record. Invariants (checked by validate()):
/// every series has timestamps.size() entries, timestamps strictly increase,
/// channel and label names are unique.
struct SensorFrame {
  std::vector<std::int64_t> timestamps;
  std::vector<Channel> channels;
  std::vector<LabelSeries> labels;
  std::string device_id;

  std::size_t rows() const noexcept { return timestamps.size(); }

  const Channel* find_channel(std::string_view name) const noexcept;
  const LabelSeries* find_label(std::string_view name) const noexcept;
  const Channel& channel(std::string_view name) const;
  const LabelSeries& label(std::string_view name) const;
  std::vector<std::string> channel_names() const;
  std::vector<std::string> label_names() const;

  /// Rows [begin, end) of every series.
  SensorFrame slice(std::size_t begin, std::size_t end) const;
  /// Keeps only the named channels, in the given order. Labels are kept.
  SensorFrame select_channels(const std::vector<std::string>& names) const;
  SensorFrame without_labels() const;

  void validate() const;

  friend bool operator==(const SensorFrame& a, const SensorFrame& b);
};

inline bool operator==(const Channel& a, const Channel& b) {
  if (a.name != b.name || a.values.size() != b.values.size()) return false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double x = a.values[i], y = b.values[i];
    if (is_missing(x) != is_missing(y)) return false;
    if (!is_missing(x) && x != y) return false;
  }
  return true;
}
inline bool operator==(const LabelSeries& a, const LabelSeries& b) {
  return a.name == b.name && a.values == b.values;
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct CsvSchema {
  std::string timestamp_column = "timestamp";
  /// Columns read as integer labels instead of channels.
  std::vector<std::string> label_columns = {std::string(kPersonLabel), std::string(kWindowLabel)};
  /// Source column name -> name used in the frame.
  std::map<std::string, std::string> rename;
  std::string device_id;
};

/// Parses ISO-8601 ("2021-11-03T14:20:00Z", optional fractional seconds and
/// +hh:mm offset, 'T' or space separator) or integer epoch seconds.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

SensorFrame parse_frame(std::string_view csv, const CsvSchema& schema = {});
SensorFrame read_frame_csv(const std::string& path, const CsvSchema& schema = {});

/// Timestamps as epoch seconds, values with round-trip precision, missing as
/// empty cells.
std::string serialize_frame(const SensorFrame& frame);
void write_frame_csv(const std::string& path, const SensorFrame& frame);

// ---------------------------------------------------------------------------
// Missing values

struct MissingRun {
  std::size_t start = 0;
  std::size_t length = 0;
  friend bool operator==(const MissingRun&, const MissingRun&) = default;
};

struct ChannelMissing {
  std::string name;
  std::size_t count = 0;
  std::vector<MissingRun> runs;
};

struct MissingReport {
  std::size_t rows = 0;
  std::vector<ChannelMissing> channels;

  const ChannelMissing& channel(std::string_view name) const;
  std::size_t total() const noexcept;
};

MissingReport missing_report(const SensorFrame& frame);

enum class EdgePolicy { trim, extend };

/// Fills interior gaps linearly in time between the nearest present
/// neighbours. Leading/trailing gaps are dropped (trim, applied to all
/// channels at once) or filled with the nearest present value (extend).
SensorFrame interpolate_missing(const SensorFrame& frame, EdgePolicy policy = EdgePolicy::trim);

/// Replaces the person count with a presence indicator (count > 0).
SensorFrame binarize_person(const SensorFrame& frame);

// ---------------------------------------------------------------------------
// Correlation and feature selection

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<double> values;  // row-major names.size() x names.size()

  std::size_t size() const noexcept { return names.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * names.size() + j]; }
  std::optional<std::size_t> index_of(std::string_view name) const noexcept;
};

/// Pearson r with population moments between every pair of variables.
/// Variables are channel or label names; labels enter as 0/1 numerics.
CorrelationMatrix pearson_matrix(const SensorFrame& frame, const std::vector<std::string>& variables);

struct DroppedFeature {
  std::string name;
  std::string partner;  // the feature it was too correlated with
  double pair_r = 0.0;
  double class_r = 0.0;  // its own max |r| to any class
};

struct FeatureSet {
  std::vector<std::string> names;
  double threshold = 0.0;
  std::vector<DroppedFeature> dropped;
};

inline constexpr double kDefaultPairThreshold = 0.9;

/// Greedy redundancy elimination. Feature pairs are visited in descending
/// |r|; while a surviving pair exceeds the threshold, the member with the
/// smaller max |r| to any class is dropped (ties drop the later feature).
FeatureSet select_features(const CorrelationMatrix& matrix, double pair_threshold,
                           const std::vector<std::string>& class_names);

void to_json(nlohmann::json& j, const MissingReport& r);
void to_json(nlohmann::json& j, const CorrelationMatrix& m);
void from_json(const nlohmann::json& j, CorrelationMatrix& m);
void to_json(nlohmann::json& j, const FeatureSet& f);
void from_json(const nlohmann::json& j, FeatureSet& f);

}  // namespace roomsense
