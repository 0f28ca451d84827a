#include "roomsense/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "roomsense/error.hpp"
#include "roomsense/io.hpp"
#include "roomsense/rng.hpp"

namespace roomsense {

BinaryMatrix BinaryMatrix::gather(const std::vector<std::size_t>& index) const {
  BinaryMatrix out(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i)
    std::copy_n(data.begin() + index[i] * cols, cols, out.data.begin() + i * cols);
  return out;
}

BinaryMatrix label_matrix(const SensorFrame& frame, const std::vector<std::string>& classes) {
  BinaryMatrix m(frame.rows(), classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& l = frame.label(classes[k]);
    for (std::size_t i = 0; i < frame.rows(); ++i) m(i, k) = l.values[i] > 0 ? 1 : 0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Segmentation

std::vector<Segment> undersample(const BinaryMatrix& labels, std::size_t k) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < labels.rows; ++i) {
    bool positive = false;
    for (std::size_t c = 0; c < labels.cols; ++c) positive = positive || labels(i, c);
    if (!positive) continue;
    const std::size_t lo = i >= k ? i - k : 0;
    const std::size_t hi = std::min(labels.rows, i + k + 1);
    if (!out.empty() && lo <= out.back().end)
      out.back().end = std::max(out.back().end, hi);
    else
      out.push_back({lo, hi, SegmentReason::event_window});
  }
  return out;
}

std::vector<Segment> split_on_gaps(const SensorFrame& frame, std::int64_t max_gap) {
  if (max_gap <= 0) throw ConfigError("max_gap must be positive");
  const std::size_t n = frame.rows();
  std::vector<Segment> out;
  if (n == 0) return out;
  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (frame.timestamps[i] - frame.timestamps[i - 1] > max_gap) {
      out.push_back({start, i, SegmentReason::time_gap_piece});
      start = i;
    }
  }
  out.push_back({start, n, out.empty() ? SegmentReason::full_frame : SegmentReason::time_gap_piece});
  return out;
}

std::vector<Segment> intersect(const std::vector<Segment>& a, const std::vector<Segment>& b) {
  std::vector<Segment> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const std::size_t lo = std::max(a[i].start, b[j].start);
    const std::size_t hi = std::min(a[i].end, b[j].end);
    if (lo < hi) {
      // event windows stay event windows, otherwise the gap piece wins
      const SegmentReason reason =
          a[i].reason == SegmentReason::event_window || b[j].reason == SegmentReason::event_window
              ? SegmentReason::event_window
              : (a[i].reason == SegmentReason::full_frame ? b[j].reason : a[i].reason);
      out.push_back({lo, hi, reason});
    }
    if (a[i].end < b[j].end)
      ++i;
    else
      ++j;
  }
  return out;
}

std::vector<std::size_t> slide(const Segment& segment, std::size_t length, std::size_t stride) {
  if (length == 0 || stride == 0) throw ConfigError("window length and stride must be >= 1");
  std::vector<std::size_t> starts;
  for (std::size_t s = segment.start; s + length <= segment.end; s += stride) starts.push_back(s);
  return starts;
}

// ---------------------------------------------------------------------------
// Labels

std::string to_string(LabelPosition p) {
  switch (p) {
    case LabelPosition::first: return "first";
    case LabelPosition::mean: return "mean";
    case LabelPosition::last: return "last";
  }
  return "first";
}

LabelPosition parse_label_position(std::string_view s) {
  if (s == "first") return LabelPosition::first;
  if (s == "mean") return LabelPosition::mean;
  if (s == "last") return LabelPosition::last;
  throw ConfigError("label position must be first, mean or last, got '" + std::string(s) + "'");
}

std::vector<std::uint8_t> window_label(const BinaryMatrix& labels, std::size_t start, std::size_t length,
                                       LabelPosition position) {
  if (length == 0 || start + length > labels.rows) throw ShapeError("window exceeds label rows");
  std::vector<std::uint8_t> out(labels.cols);
  for (std::size_t c = 0; c < labels.cols; ++c) {
    switch (position) {
      case LabelPosition::first: out[c] = labels(start, c); break;
      case LabelPosition::last: out[c] = labels(start + length - 1, c); break;
      case LabelPosition::mean: {
        std::size_t ones = 0;
        for (std::size_t t = start; t < start + length; ++t) ones += labels(t, c);
        // mean >= 0.5 without floating point
        out[c] = 2 * ones >= length ? 1 : 0;
        break;
      }
    }
  }
  return out;
}

std::size_t label_offset(std::size_t length, LabelPosition position) {
  switch (position) {
    case LabelPosition::first: return 0;
    case LabelPosition::mean: return (length - 1) / 2;
    case LabelPosition::last: return length - 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Windows

WindowSet WindowSet::subset(const std::vector<std::size_t>& index) const {
  WindowSet out;
  out.x = x.gather(index);
  out.y = y.gather(index);
  out.channels = channels;
  out.classes = classes;
  out.position = position;
  out.scaler = scaler;
  for (std::size_t i : index) out.start_times.push_back(start_times[i]);
  return out;
}

WindowSet build_windows(const SensorFrame& frame, const std::vector<Segment>& segments, const WindowSpec& spec,
                        const std::vector<std::string>& classes) {
  const std::size_t channels = frame.channels.size();
  const std::size_t len = spec.length;
  std::vector<std::size_t> starts;
  for (const auto& seg : segments) {
    if (seg.end > frame.rows() || seg.start >= seg.end) throw ShapeError("segment outside frame");
    const auto s = slide(seg, len, spec.stride);
    starts.insert(starts.end(), s.begin(), s.end());
  }
  for (const auto& c : frame.channels)
    for (double v : c.values)
      if (is_missing(v)) throw DegenerateError(c.name, "missing values must be interpolated before windowing");

  const BinaryMatrix labels = label_matrix(frame, classes);
  WindowSet w;
  w.channels = frame.channel_names();
  w.classes = classes;
  w.position = spec.position;
  w.x = Tensor({starts.size(), channels, len});
  w.y = BinaryMatrix(starts.size(), classes.size());
  for (std::size_t n = 0; n < starts.size(); ++n) {
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(frame.channels[c].values.begin() + starts[n], len, w.x.data() + (n * channels + c) * len);
    const auto lab = window_label(labels, starts[n], len, spec.position);
    std::copy(lab.begin(), lab.end(), w.y.data.begin() + n * classes.size());
    w.start_times.push_back(frame.timestamps[starts[n]]);
  }
  return w;
}

WindowSet concat(const WindowSet& a, const WindowSet& b) {
  if (a.count() == 0) return b;
  if (b.count() == 0) return a;
  if (a.channels != b.channels || a.classes != b.classes || a.position != b.position || a.length() != b.length())
    throw SchemaError("cannot concatenate window sets with different layouts");
  WindowSet out = a;
  auto shape = a.x.shape();
  shape[0] += b.count();
  std::vector<double> xs = a.x.values();
  xs.insert(xs.end(), b.x.values().begin(), b.x.values().end());
  out.x = Tensor(shape, std::move(xs));
  out.y.rows += b.y.rows;
  out.y.data.insert(out.y.data.end(), b.y.data.begin(), b.y.data.end());
  out.start_times.insert(out.start_times.end(), b.start_times.begin(), b.start_times.end());
  return out;
}

// ---------------------------------------------------------------------------
// Splits

SplitIndex split_random_index(std::size_t n, const SplitSpec& spec) {
  if (spec.mode != SplitMode::random_after_segmentation) throw ConfigError("split_random requires random mode");
  for (double r : spec.ratios)
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
  const double total = spec.ratios[0] + spec.ratios[1] + spec.ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.ratios[0]));
  const auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.ratios[1]));
  if (n < 3 || n_train < 1 || n_valid < 1 || n_train + n_valid >= n)
    throw SplitError("cannot split " + std::to_string(n) + " windows into three non-empty parts");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(order);
  SplitIndex out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.valid.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  out.test.assign(order.begin() + n_train + n_valid, order.end());
  return out;
}

std::array<WindowSet, 3> split_random(const WindowSet& windows, const SplitSpec& spec) {
  const auto idx = split_random_index(windows.count(), spec);
  return {windows.subset(idx.train), windows.subset(idx.valid), windows.subset(idx.test)};
}

std::pair<WindowSet, WindowSet> holdout(const WindowSet& windows, double valid_fraction, std::uint64_t seed) {
  const std::size_t n = windows.count();
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) throw ConfigError("valid fraction must lie in (0, 1)");
  const auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * valid_fraction));
  if (n_valid < 1 || n_valid >= n)
    throw SplitError("cannot hold out " + std::to_string(n_valid) + " of " + std::to_string(n) + " windows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_valid));
  std::vector<std::size_t> valid(order.end() - static_cast<std::ptrdiff_t>(n_valid), order.end());
  return {windows.subset(train), windows.subset(valid)};
}

std::pair<SensorFrame, SensorFrame> split_time(const SensorFrame& frame, std::int64_t cut) {
  if (frame.rows() < 2 || cut <= frame.timestamps.front() || cut > frame.timestamps.back())
    throw ConfigError("time cut " + std::to_string(cut) + " is not inside the frame's time range");
  const auto it = std::lower_bound(frame.timestamps.begin(), frame.timestamps.end(), cut);
  const auto at = static_cast<std::size_t>(it - frame.timestamps.begin());
  return {frame.slice(0, at), frame.slice(at, frame.rows())};
}

// ---------------------------------------------------------------------------
// Scaling

std::string to_string(ScalerKind k) { return k == ScalerKind::standard ? "standard" : "minmax"; }

ScalerKind parse_scaler_kind(std::string_view s) {
  if (s == "standard") return ScalerKind::standard;
  if (s == "minmax") return ScalerKind::minmax;
  throw ConfigError("scaler must be standard or minmax, got '" + std::string(s) + "'");
}

namespace {

// Accumulates per-channel statistics over any sequence of values.
struct ChannelStats {
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  std::vector<double> values;
};

ScalerParams finish_fit(ScalerKind kind, const std::vector<std::string>& names, std::vector<ChannelStats>& stats) {
  ScalerParams p{kind, names, {}, {}};
  for (std::size_t c = 0; c < names.size(); ++c) {
    auto& s = stats[c];
    if (s.n == 0) throw DegenerateError(names[c], "no data to fit a scaler");
    if (kind == ScalerKind::standard) {
      const double mean = s.sum / static_cast<double>(s.n);
      double var = 0.0;
      for (double v : s.values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(s.n);
      if (!(var > 0.0)) throw DegenerateError(names[c], "zero standard deviation");
      p.offset.push_back(mean);
      p.scale.push_back(std::sqrt(var));
    } else {
      if (!(s.hi > s.lo)) throw DegenerateError(names[c], "min equals max");
      p.offset.push_back(s.lo);
      p.scale.push_back(s.hi - s.lo);
    }
  }
  return p;
}

void accumulate(ChannelStats& s, double v) {
  if (!std::isfinite(v)) throw DegenerateError("scaler", "non-finite value in fit data");
  s.sum += v;
  s.lo = std::min(s.lo, v);
  s.hi = std::max(s.hi, v);
  ++s.n;
  s.values.push_back(v);
}

std::vector<std::size_t> channel_map(const ScalerParams& scaler, const std::vector<std::string>& names) {
  std::vector<std::size_t> map;
  for (const auto& n : names) {
    const auto it = std::find(scaler.channels.begin(), scaler.channels.end(), n);
    if (it == scaler.channels.end()) throw SchemaError("scaler has no statistics for channel '" + n + "'");
    map.push_back(static_cast<std::size_t>(it - scaler.channels.begin()));
  }
  return map;
}

}  // namespace

ScalerParams fit_scaler(ScalerKind kind, const WindowSet& train) {
  const std::size_t n = train.count(), channels = train.channels.size(), len = train.length();
  std::vector<ChannelStats> stats(channels);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < len; ++t) accumulate(stats[c], train.x.at(i, c, t));
  return finish_fit(kind, train.channels, stats);
}

ScalerParams fit_scaler(ScalerKind kind, const SensorFrame& train) {
  std::vector<ChannelStats> stats(train.channels.size());
  for (std::size_t c = 0; c < train.channels.size(); ++c)
    for (double v : train.channels[c].values) accumulate(stats[c], v);
  return finish_fit(kind, train.channel_names(), stats);
}

WindowSet transform(const ScalerParams& scaler, const WindowSet& data) {
  const auto map = channel_map(scaler, data.channels);
  WindowSet out = data;
  const std::size_t n = data.count(), channels = data.channels.size(), len = data.length();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < len; ++t)
        out.x.at(i, c, t) = (data.x.at(i, c, t) - scaler.offset[map[c]]) / scaler.scale[map[c]];
  out.scaler = scaler;
  return out;
}

SensorFrame transform(const ScalerParams& scaler, const SensorFrame& data) {
  const auto map = channel_map(scaler, data.channel_names());
  SensorFrame out = data;
  for (std::size_t c = 0; c < out.channels.size(); ++c)
    for (double& v : out.channels[c].values) v = (v - scaler.offset[map[c]]) / scaler.scale[map[c]];
  return out;
}

WindowSet inverse_transform(const ScalerParams& scaler, const WindowSet& data) {
  const auto map = channel_map(scaler, data.channels);
  WindowSet out = data;
  const std::size_t n = data.count(), channels = data.channels.size(), len = data.length();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < len; ++t)
        out.x.at(i, c, t) = data.x.at(i, c, t) * scaler.scale[map[c]] + scaler.offset[map[c]];
  out.scaler = nullptr;
  return out;
}

void to_json(nlohmann::json& j, const ScalerParams& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)}, {"channels", s.channels}};
  if (s.kind == ScalerKind::standard)
    j["mean"] = s.offset, j["std"] = s.scale;
  else
    j["min"] = s.offset, j["range"] = s.scale;
}

void from_json(const nlohmann::json& j, ScalerParams& s) {
  s.kind = parse_scaler_kind(j.at("kind").get<std::string>());
  s.channels = j.at("channels").get<std::vector<std::string>>();
  if (s.kind == ScalerKind::standard) {
    s.offset = j.at("mean").get<std::vector<double>>();
    s.scale = j.at("std").get<std::vector<double>>();
  } else {
    s.offset = j.at("min").get<std::vector<double>>();
    s.scale = j.at("range").get<std::vector<double>>();
  }
  if (s.offset.size() != s.channels.size() || s.scale.size() != s.channels.size())
    throw SchemaError("scaler statistics do not match its channel list");
  for (std::size_t c = 0; c < s.channels.size(); ++c)
    if (!(s.scale[c] > 0.0)) throw DegenerateError(s.channels[c], "scaler has non-positive scale");
}

void to_json(nlohmann::json& j, const Segment& s) {
  static constexpr const char* reasons[] = {"event-window", "full-frame", "time-gap-piece"};
  j = nlohmann::json{{"start", s.start}, {"end", s.end}, {"reason", reasons[static_cast<int>(s.reason)]}};
}

// ---------------------------------------------------------------------------
// Container

void save_windows(const std::string& base, const WindowSet& w) {
  nlohmann::json header{{"format", "roomsense-windows/1"},
                        {"shape", {w.count(), w.channels.size(), w.length()}},
                        {"classes_shape", {w.y.rows, w.y.cols}},
                        {"channels", w.channels},
                        {"classes", w.classes},
                        {"label_position", to_string(w.position)},
                        {"start_times", w.start_times},
                        {"scaler", w.scaler},
                        {"payload", "little-endian f64: X (N,C,L) row-major, then Y (N,K) as 0/1"}};
  std::vector<double> payload = w.x.values();
  for (auto v : w.y.data) payload.push_back(v);
  io::write_json(base + ".json", header);
  io::write_f64(base + ".bin", payload);
}

WindowSet load_windows(const std::string& base) {
  const auto header = io::read_json(base + ".json");
  if (header.value("format", "") != "roomsense-windows/1") throw SchemaError("'" + base + ".json' is not a window set");
  const auto shape = header.at("shape").get<std::vector<std::size_t>>();
  const auto yshape = header.at("classes_shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3 || yshape.size() != 2 || yshape[0] != shape[0]) throw SchemaError("window set shape invalid");
  const auto payload = io::read_f64(base + ".bin");
  const std::size_t nx = shape[0] * shape[1] * shape[2];
  if (payload.size() != nx + yshape[0] * yshape[1]) throw SchemaError("window payload size does not match header");
  WindowSet w;
  w.x = Tensor(shape, std::vector<double>(payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(nx)));
  w.y = BinaryMatrix(yshape[0], yshape[1]);
  for (std::size_t i = 0; i < w.y.data.size(); ++i) w.y.data[i] = payload[nx + i] != 0.0 ? 1 : 0;
  w.channels = header.at("channels").get<std::vector<std::string>>();
  w.classes = header.at("classes").get<std::vector<std::string>>();
  w.position = parse_label_position(header.at("label_position").get<std::string>());
  w.start_times = header.at("start_times").get<std::vector<std::int64_t>>();
  w.scaler = header.at("scaler");
  if (w.channels.size() != shape[1] || w.classes.size() != yshape[1] || w.start_times.size() != shape[0])
    throw SchemaError("window set metadata does not match its shape");
  return w;
}

}  // namespace roomsense
