#include "roomsense/timeline.hpp"

#include <cmath>
#include <iterator>
#include <limits>
#include <list>
#include <set>
#include <sstream>

#include "roomsense/error.hpp"

namespace roomsense {

std::size_t PredictionTrack::predicted() const {
  if (decision.empty()) return 0;
  std::size_t n = 0;
  for (int d : decision.front()) n += d != kNoPrediction;
  return n;
}

PredictionTrack predict_timeline(const Classifier& classifier, const SensorFrame& frame, const WindowSpec& spec,
                                 const ScalerParams& scaler, const std::vector<std::string>& classes,
                                 double threshold, std::int64_t max_gap) {
  PredictionTrack track;
  track.timestamps = frame.timestamps;
  track.classes = classes;
  track.threshold = threshold;
  const std::size_t n = frame.rows(), k = classes.size();
  track.probability.assign(k, std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  track.decision.assign(k, std::vector<int>(n, kNoPrediction));
  if (n < spec.length) {
    track.warnings.push_back("frame has " + std::to_string(n) + " rows, fewer than the window length " +
                             std::to_string(spec.length) + "; no predictions");
    return track;
  }

  const SensorFrame scaled = transform(scaler, frame.select_channels(scaler.channels));
  const WindowSpec stride1{spec.length, 1, spec.position};
  const WindowSet windows = build_windows(scaled, split_on_gaps(scaled, max_gap), stride1, {});
  if (windows.count() == 0) {
    track.warnings.push_back("no gap-free stretch is as long as the window; no predictions");
    return track;
  }
  const Tensor p = classifier.predict(windows.x);
  if (p.dim(1) != k) throw ShapeError("classifier predicts " + std::to_string(p.dim(1)) + " classes, expected " + std::to_string(k));
  const std::size_t offset = label_offset(spec.length, spec.position);
  // start_times are frame timestamps, so map them back to rows in one sweep
  std::size_t row = 0;
  for (std::size_t w = 0; w < windows.count(); ++w) {
    while (frame.timestamps[row] != windows.start_times[w]) ++row;
    const std::size_t at = row + offset;
    for (std::size_t c = 0; c < k; ++c) {
      track.probability[c][at] = p.at(w, c);
      track.decision[c][at] = p.at(w, c) >= threshold ? 1 : 0;
    }
  }
  return track;
}

namespace {

struct Run {
  std::size_t start, length;
  int value;
};

}  // namespace

std::vector<int> smooth_decisions(const std::vector<int>& decisions, std::size_t w) {
  if (w < 1) throw ConfigError("smoothing width must be >= 1");
  std::list<Run> runs;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (!runs.empty() && runs.back().value == decisions[i])
      ++runs.back().length;
    else
      runs.push_back({i, 1, decisions[i]});
  }
  using It = std::list<Run>::iterator;
  const auto qualifies = [&](It it) {
    if (it->value == kNoPrediction || it->length >= w || it == runs.begin() || std::next(it) == runs.end()) return false;
    const int left = std::prev(it)->value, right = std::next(it)->value;
    return left == right && left != kNoPrediction;
  };
  const auto key_less = [](const It& a, const It& b) {
    return a->length != b->length ? a->length < b->length : a->start < b->start;
  };
  std::set<It, decltype(key_less)> queue(key_less);
  for (It it = runs.begin(); it != runs.end(); ++it)
    if (qualifies(it)) queue.insert(it);

  while (!queue.empty()) {
    const It it = *queue.begin();
    queue.erase(queue.begin());
    It left = std::prev(it), right = std::next(it);
    // neighbours of the merged run may change status, so drop them first
    for (It n : {left, right}) queue.erase(n);
    if (left != runs.begin()) queue.erase(std::prev(left));
    if (std::next(right) != runs.end()) queue.erase(std::next(right));
    left->length += it->length + right->length;
    runs.erase(it);
    runs.erase(right);
    for (It n : {left, left == runs.begin() ? left : std::prev(left), std::next(left) == runs.end() ? left : std::next(left)})
      if (qualifies(n)) queue.insert(n);
  }

  std::vector<int> out;
  out.reserve(decisions.size());
  for (const auto& r : runs) out.insert(out.end(), r.length, r.value);
  return out;
}

PredictionTrack smooth(const PredictionTrack& track, std::size_t w) {
  PredictionTrack out = track;
  for (auto& d : out.decision) d = smooth_decisions(d, w);
  return out;
}

void to_json(nlohmann::json& j, const PredictionTrack& t) {
  nlohmann::json prob = nlohmann::json::object(), dec = nlohmann::json::object();
  for (std::size_t k = 0; k < t.classes.size(); ++k) {
    nlohmann::json p = nlohmann::json::array();
    for (double v : t.probability[k]) p.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    prob[t.classes[k]] = p;
    dec[t.classes[k]] = t.decision[k];
  }
  j = {{"timestamps", t.timestamps}, {"classes", t.classes}, {"threshold", t.threshold}, {"no_prediction", kNoPrediction},
       {"probability", prob},        {"decision", dec},        {"warnings", t.warnings}};
}

void from_json(const nlohmann::json& j, PredictionTrack& t) {
  t = {};
  t.timestamps = j.at("timestamps").get<std::vector<std::int64_t>>();
  t.classes = j.at("classes").get<std::vector<std::string>>();
  t.threshold = j.at("threshold").get<double>();
  if (j.contains("warnings")) t.warnings = j.at("warnings").get<std::vector<std::string>>();
  for (const auto& c : t.classes) {
    std::vector<double> p;
    for (const auto& v : j.at("probability").at(c)) p.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    t.probability.push_back(std::move(p));
    t.decision.push_back(j.at("decision").at(c).get<std::vector<int>>());
    if (t.probability.back().size() != t.timestamps.size() || t.decision.back().size() != t.timestamps.size())
      throw SchemaError("track series for '" + c + "' does not match the timestamp count");
  }
}

std::string track_csv(const PredictionTrack& t) {
  std::ostringstream os;
  os.precision(17);
  os << "timestamp";
  for (const auto& c : t.classes) os << ',' << c << "_probability," << c << "_decision";
  os << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << t.timestamps[i];
    for (std::size_t k = 0; k < t.classes.size(); ++k) {
      os << ',';
      if (!std::isnan(t.probability[k][i])) os << t.probability[k][i];
      os << ',';
      if (t.decision[k][i] != kNoPrediction) os << t.decision[k][i];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace roomsense
