#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "roomsense/frame.hpp"
#include "roomsense/tensor.hpp"

namespace roomsense {

/// Row-major 0/1 matrix, (rows, cols).
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  std::uint8_t& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  std::uint8_t operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  BinaryMatrix gather(const std::vector<std::size_t>& index) const;

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;
};

/// (rows, classes) indicator matrix from the frame's label series (value > 0 -> 1).
BinaryMatrix label_matrix(const SensorFrame& frame, const std::vector<std::string>& classes);

enum class SegmentReason { event_window, full_frame, time_gap_piece };

/// Half-open row range [start, end) of a frame.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  SegmentReason reason = SegmentReason::full_frame;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

inline constexpr std::int64_t kDefaultMaxGap = 3 * kSamplePeriod;
inline constexpr std::size_t kTableOneContext = 30;
inline constexpr std::size_t kDefaultContext = 50;

/// Keeps rows within +-k of any positive label. Overlapping expansions are
/// merged; the result is sorted and disjoint. No positives, no segments.
std::vector<Segment> undersample(const BinaryMatrix& labels, std::size_t k);

/// Cuts wherever consecutive timestamps differ by more than max_gap seconds.
std::vector<Segment> split_on_gaps(const SensorFrame& frame, std::int64_t max_gap = kDefaultMaxGap);

/// Pairwise intersection of two sorted, disjoint segment lists.
std::vector<Segment> intersect(const std::vector<Segment>& a, const std::vector<Segment>& b);

/// Window start rows {start, start+stride, ...} with start + length <= end.
std::vector<std::size_t> slide(const Segment& segment, std::size_t length, std::size_t stride);

enum class LabelPosition { first, mean, last };

std::string to_string(LabelPosition p);
LabelPosition parse_label_position(std::string_view s);

/// Collapses a window's per-step labels (rows [start, start+length) of
/// `labels`) to one label per class. `mean` thresholds the per-class mean
/// at >= 0.5.
std::vector<std::uint8_t> window_label(const BinaryMatrix& labels, std::size_t start, std::size_t length,
                                       LabelPosition position);

/// Row offset inside a window whose timestamp a window's label stands for.
std::size_t label_offset(std::size_t length, LabelPosition position);

struct WindowSpec {
  std::size_t length = 7;
  std::size_t stride = 1;
  LabelPosition position = LabelPosition::first;
};

/// Fixed-length sequences X (N, C, L) with labels Y (N, K).
struct WindowSet {
  Tensor x;
  BinaryMatrix y;
  std::vector<std::string> channels;
  std::vector<std::string> classes;
  std::vector<std::int64_t> start_times;
  LabelPosition position = LabelPosition::first;
  nlohmann::json scaler;  // provenance of the scaling applied, null when unscaled

  std::size_t count() const noexcept { return start_times.size(); }
  std::size_t length() const { return x.rank() == 3 ? x.dim(2) : 0; }
  WindowSet subset(const std::vector<std::size_t>& index) const;

  friend bool operator==(const WindowSet&, const WindowSet&) = default;
};

/// Concatenates windows from each segment, in segment order. The frame must
/// be free of missing values; `classes` may be empty for unlabeled data.
WindowSet build_windows(const SensorFrame& frame, const std::vector<Segment>& segments, const WindowSpec& spec,
                        const std::vector<std::string>& classes);

/// Appends b to a. Channel, class and position metadata must match.
WindowSet concat(const WindowSet& a, const WindowSet& b);

enum class SplitMode { random_after_segmentation, time_before_segmentation };

struct SplitSpec {
  SplitMode mode = SplitMode::random_after_segmentation;
  std::array<double, 3> ratios = {0.7, 0.2, 0.1};
  std::uint64_t seed = 0;
  std::optional<std::int64_t> cut;
};

struct SplitIndex {
  std::vector<std::size_t> train, valid, test;
};

/// Seeded shuffle then contiguous cut: sizes round(N*r_train),
/// round(N*r_valid), remainder.
SplitIndex split_random_index(std::size_t n, const SplitSpec& spec);
std::array<WindowSet, 3> split_random(const WindowSet& windows, const SplitSpec& spec);

/// Seeded shuffle into (train, valid) with round(N * valid_fraction) valid.
std::pair<WindowSet, WindowSet> holdout(const WindowSet& windows, double valid_fraction, std::uint64_t seed);

/// Rows with timestamp < cut go to the first frame, the rest to the second.
std::pair<SensorFrame, SensorFrame> split_time(const SensorFrame& frame, std::int64_t cut);

enum class ScalerKind { standard, minmax };

std::string to_string(ScalerKind k);
ScalerKind parse_scaler_kind(std::string_view s);

/// standard: (offset, scale) = (mean, population std);
/// minmax: (offset, scale) = (min, max - min).
struct ScalerParams {
  ScalerKind kind = ScalerKind::standard;
  std::vector<std::string> channels;
  std::vector<double> offset;
  std::vector<double> scale;

  friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

ScalerParams fit_scaler(ScalerKind kind, const WindowSet& train);
ScalerParams fit_scaler(ScalerKind kind, const SensorFrame& train);

WindowSet transform(const ScalerParams& scaler, const WindowSet& data);
SensorFrame transform(const ScalerParams& scaler, const SensorFrame& data);
WindowSet inverse_transform(const ScalerParams& scaler, const WindowSet& data);

void to_json(nlohmann::json& j, const ScalerParams& s);
void from_json(const nlohmann::json& j, ScalerParams& s);
void to_json(nlohmann::json& j, const Segment& s);

/// Writes `<base>.json` (shape, names, label position, start times, scaler
/// provenance) and `<base>.bin` (little-endian f64: X then Y).
void save_windows(const std::string& base, const WindowSet& w);
WindowSet load_windows(const std::string& base);

}  // namespace roomsense
