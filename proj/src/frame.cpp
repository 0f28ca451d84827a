#include "roomsense/frame.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <set>

#include "roomsense/error.hpp"
#include "roomsense/io.hpp"

namespace roomsense {

const std::vector<std::string>& canonical_channels() {
  static const std::vector<std::string> names = {
      "pressure", "temperature", "sound", "tvoc",  "oxygen", "humidity", "humidity_abs", "co2",   "co",
      "so2",      "no2",         "o3",    "pm2_5", "pm10",   "pm1",      "sound_max",    "dewpt"};
  return names;
}

// ---------------------------------------------------------------------------
// SensorFrame

const Channel* SensorFrame::find_channel(std::string_view name) const noexcept {
  for (const auto& c : channels)
    if (c.name == name) return &c;
  return nullptr;
}

const LabelSeries* SensorFrame::find_label(std::string_view name) const noexcept {
  for (const auto& l : labels)
    if (l.name == name) return &l;
  return nullptr;
}

const Channel& SensorFrame::channel(std::string_view name) const {
  if (const auto* c = find_channel(name)) return *c;
  throw SchemaError("frame has no channel '" + std::string(name) + "'");
}

const LabelSeries& SensorFrame::label(std::string_view name) const {
  if (const auto* l = find_label(name)) return *l;
  throw SchemaError("frame has no label '" + std::string(name) + "'");
}

std::vector<std::string> SensorFrame::channel_names() const {
  std::vector<std::string> out;
  for (const auto& c : channels) out.push_back(c.name);
  return out;
}

std::vector<std::string> SensorFrame::label_names() const {
  std::vector<std::string> out;
  for (const auto& l : labels) out.push_back(l.name);
  return out;
}

SensorFrame SensorFrame::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows()) throw ShapeError("frame slice out of range");
  SensorFrame out;
  out.device_id = device_id;
  out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
  for (const auto& c : channels)
    out.channels.push_back({c.name, {c.values.begin() + begin, c.values.begin() + end}});
  for (const auto& l : labels)
    out.labels.push_back({l.name, {l.values.begin() + begin, l.values.begin() + end}});
  return out;
}

SensorFrame SensorFrame::select_channels(const std::vector<std::string>& names) const {
  SensorFrame out;
  out.device_id = device_id;
  out.timestamps = timestamps;
  out.labels = labels;
  for (const auto& n : names) out.channels.push_back(channel(n));
  return out;
}

SensorFrame SensorFrame::without_labels() const {
  SensorFrame out = *this;
  out.labels.clear();
  return out;
}

void SensorFrame::validate() const {
  const std::size_t n = rows();
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (c.values.size() != n) throw IntegrityError("channel '" + c.name + "' length differs from timestamps");
    if (!seen.insert(c.name).second) throw IntegrityError("duplicate channel '" + c.name + "'");
  }
  seen.clear();
  for (const auto& l : labels) {
    if (l.values.size() != n) throw IntegrityError("label '" + l.name + "' length differs from timestamps");
    if (!seen.insert(l.name).second) throw IntegrityError("duplicate label '" + l.name + "'");
  }
  for (std::size_t i = 1; i < n; ++i)
    if (timestamps[i] <= timestamps[i - 1])
      throw IntegrityError("timestamps not strictly increasing at row " + std::to_string(i));
}

bool operator==(const SensorFrame& a, const SensorFrame& b) {
  return a.device_id == b.device_id && a.timestamps == b.timestamps && a.channels == b.channels &&
         a.labels == b.labels;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    cells.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool take_digits(std::string_view& s, std::size_t n, int& out) {
  if (s.size() < n) return false;
  out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  s.remove_prefix(n);
  return true;
}

bool take_char(std::string_view& s, char c) {
  if (s.empty() || s.front() != c) return false;
  s.remove_prefix(1);
  return true;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  text = trim(text);
  std::int64_t epoch = 0;
  if (parse_number(text, epoch)) return epoch;

  int year, month, day, hour, minute, second;
  std::string_view s = text;
  if (!take_digits(s, 4, year) || !take_char(s, '-') || !take_digits(s, 2, month) || !take_char(s, '-') ||
      !take_digits(s, 2, day))
    return std::nullopt;
  if (!take_char(s, 'T') && !take_char(s, ' ')) return std::nullopt;
  if (!take_digits(s, 2, hour) || !take_char(s, ':') || !take_digits(s, 2, minute) || !take_char(s, ':') ||
      !take_digits(s, 2, second))
    return std::nullopt;
  if (take_char(s, '.')) {
    while (!s.empty() && s.front() >= '0' && s.front() <= '9') s.remove_prefix(1);
  }
  std::int64_t offset = 0;
  if (take_char(s, 'Z')) {
  } else if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    const int sign = s.front() == '+' ? 1 : -1;
    s.remove_prefix(1);
    int oh, om = 0;
    if (!take_digits(s, 2, oh)) return std::nullopt;
    take_char(s, ':');
    if (!s.empty() && !take_digits(s, 2, om)) return std::nullopt;
    offset = sign * (oh * 3600 + om * 60);
  }
  if (!s.empty()) return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 + hour * 3600 +
         minute * 60 + second - offset;
}

SensorFrame parse_frame(std::string_view csv, const CsvSchema& schema) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t nl = csv.find('\n', pos);
    if (nl == std::string_view::npos) nl = csv.size();
    lines.push_back(csv.substr(pos, nl - pos));
    pos = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw SchemaError("CSV has no header row");

  const auto header = split_cells(lines[0]);
  enum class Role { timestamp, channel, label };
  std::vector<Role> roles;
  std::vector<std::size_t> slot;
  SensorFrame frame;
  frame.device_id = schema.device_id;
  std::set<std::string> names;
  bool has_timestamp = false;
  for (const auto cell : header) {
    std::string name(cell);
    if (name.empty()) throw SchemaError("CSV header has an empty column name");
    if (name == schema.timestamp_column) {
      if (has_timestamp) throw SchemaError("CSV header repeats the timestamp column");
      has_timestamp = true;
      roles.push_back(Role::timestamp);
      slot.push_back(0);
      continue;
    }
    if (const auto it = schema.rename.find(name); it != schema.rename.end()) name = it->second;
    if (!names.insert(name).second) throw SchemaError("CSV header repeats column '" + name + "'");
    const bool is_label =
        std::find(schema.label_columns.begin(), schema.label_columns.end(), name) != schema.label_columns.end();
    if (is_label) {
      roles.push_back(Role::label);
      slot.push_back(frame.labels.size());
      frame.labels.push_back({name, {}});
    } else {
      roles.push_back(Role::channel);
      slot.push_back(frame.channels.size());
      frame.channels.push_back({name, {}});
    }
  }
  if (!has_timestamp) throw SchemaError("CSV header lacks the '" + schema.timestamp_column + "' column");

  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::size_t row = li + 1;  // 1-based line number, header is line 1
    const auto cells = split_cells(lines[li]);
    if (cells.size() != header.size())
      throw ParseError(row, "", "expected " + std::to_string(header.size()) + " cells, found " +
                                    std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string column(header[c]);
      switch (roles[c]) {
        case Role::timestamp: {
          const auto ts = parse_timestamp(cells[c]);
          if (!ts) throw ParseError(row, column, "unparseable timestamp '" + std::string(cells[c]) + "'");
          frame.timestamps.push_back(*ts);
          break;
        }
        case Role::channel: {
          double v = kMissing;
          if (!cells[c].empty() && !parse_number(cells[c], v))
            throw ParseError(row, column, "unparseable number '" + std::string(cells[c]) + "'");
          if (!cells[c].empty() && !std::isfinite(v)) throw ParseError(row, column, "non-finite value");
          frame.channels[slot[c]].values.push_back(v);
          break;
        }
        case Role::label: {
          std::int64_t v = 0;
          if (!parse_number(cells[c], v) || v < 0)
            throw ParseError(row, column, "label must be an integer >= 0, got '" + std::string(cells[c]) + "'");
          frame.labels[slot[c]].values.push_back(v);
          break;
        }
      }
    }
  }

  std::vector<std::size_t> order(frame.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frame.timestamps[a] < frame.timestamps[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (frame.timestamps[order[i]] == frame.timestamps[order[i - 1]])
      throw IntegrityError("duplicate timestamp " + std::to_string(frame.timestamps[order[i]]));
  auto permute = [&](auto& v) {
    auto copy = v;
    for (std::size_t i = 0; i < order.size(); ++i) v[i] = copy[order[i]];
  };
  permute(frame.timestamps);
  for (auto& c : frame.channels) permute(c.values);
  for (auto& l : frame.labels) permute(l.values);
  frame.validate();
  return frame;
}

SensorFrame read_frame_csv(const std::string& path, const CsvSchema& schema) {
  return parse_frame(io::read_text(path), schema);
}

std::string serialize_frame(const SensorFrame& frame) {
  std::string out = "timestamp";
  for (const auto& c : frame.channels) out += "," + c.name;
  for (const auto& l : frame.labels) out += "," + l.name;
  out += "\n";
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    out += std::to_string(frame.timestamps[i]);
    for (const auto& c : frame.channels) {
      out += ',';
      if (!is_missing(c.values[i])) out += format_double(c.values[i]);
    }
    for (const auto& l : frame.labels) out += "," + std::to_string(l.values[i]);
    out += '\n';
  }
  return out;
}

void write_frame_csv(const std::string& path, const SensorFrame& frame) { io::write_text(path, serialize_frame(frame)); }

// ---------------------------------------------------------------------------
// Missing values

const ChannelMissing& MissingReport::channel(std::string_view name) const {
  for (const auto& c : channels)
    if (c.name == name) return c;
  throw SchemaError("missing report has no channel '" + std::string(name) + "'");
}

std::size_t MissingReport::total() const noexcept {
  std::size_t n = 0;
  for (const auto& c : channels) n += c.count;
  return n;
}

MissingReport missing_report(const SensorFrame& frame) {
  MissingReport report;
  report.rows = frame.rows();
  for (const auto& c : frame.channels) {
    ChannelMissing cm{c.name, 0, {}};
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      if (!is_missing(c.values[i])) continue;
      ++cm.count;
      if (i > 0 && is_missing(c.values[i - 1]))
        ++cm.runs.back().length;
      else
        cm.runs.push_back({i, 1});
    }
    report.channels.push_back(std::move(cm));
  }
  return report;
}

SensorFrame interpolate_missing(const SensorFrame& frame, EdgePolicy policy) {
  const std::size_t n = frame.rows();
  std::size_t keep_begin = 0, keep_end = n;
  for (const auto& c : frame.channels) {
    std::size_t first = 0;
    while (first < n && is_missing(c.values[first])) ++first;
    if (first == n) throw DegenerateError(c.name, "channel has no present values to interpolate from");
    std::size_t last = n - 1;
    while (is_missing(c.values[last])) --last;
    keep_begin = std::max(keep_begin, first);
    keep_end = std::min(keep_end, last + 1);
  }
  if (policy == EdgePolicy::trim && keep_begin >= keep_end)
    throw DegenerateError(frame.device_id, "trimming leading/trailing gaps leaves no rows");

  SensorFrame out = frame;
  const auto& ts = out.timestamps;
  for (auto& c : out.channels) {
    auto& v = c.values;
    const std::size_t m = v.size();
    std::size_t prev = m;  // index of last present value, m = none yet
    for (std::size_t i = 0; i < m; ++i) {
      if (is_missing(v[i])) continue;
      if (prev == m) {
        for (std::size_t j = 0; j < i; ++j) v[j] = v[i];  // leading run (extend)
      } else if (i > prev + 1) {
        const double t0 = static_cast<double>(ts[prev]), t1 = static_cast<double>(ts[i]);
        for (std::size_t j = prev + 1; j < i; ++j) {
          const double a = (static_cast<double>(ts[j]) - t0) / (t1 - t0);
          v[j] = v[prev] + a * (v[i] - v[prev]);
        }
      }
      prev = i;
    }
    for (std::size_t j = prev + 1; j < m; ++j) v[j] = v[prev];  // trailing run (extend)
  }
  return policy == EdgePolicy::trim ? out.slice(keep_begin, keep_end) : out;
}

SensorFrame binarize_person(const SensorFrame& frame) {
  SensorFrame out = frame;
  for (auto& l : out.labels) {
    if (l.name != kPersonLabel) continue;
    for (auto& v : l.values) v = v > 0 ? 1 : 0;
    return out;
  }
  throw SchemaError("frame has no 'person' label to binarize");
}

// ---------------------------------------------------------------------------
// Correlation

std::optional<std::size_t> CorrelationMatrix::index_of(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

CorrelationMatrix pearson_matrix(const SensorFrame& frame, const std::vector<std::string>& variables) {
  const std::size_t n = frame.rows();
  if (n < 2) throw ShapeError("pearson_matrix needs at least two rows");
  const std::size_t d = variables.size();
  std::vector<std::vector<double>> centered(d);
  std::vector<double> sd(d);
  for (std::size_t k = 0; k < d; ++k) {
    auto& x = centered[k];
    if (const auto* c = frame.find_channel(variables[k])) {
      x = c->values;
    } else if (const auto* l = frame.find_label(variables[k])) {
      x.assign(l->values.begin(), l->values.end());
    } else {
      throw SchemaError("frame has no variable '" + variables[k] + "'");
    }
    double mean = 0.0;
    for (double v : x) {
      if (is_missing(v)) throw DegenerateError(variables[k], "contains missing values; interpolate first");
      mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double& v : x) {
      v -= mean;
      var += v * v;
    }
    var /= static_cast<double>(n);
    if (!(var > 0.0)) throw DegenerateError(variables[k], "zero variance");
    sd[k] = std::sqrt(var);
  }

  CorrelationMatrix m{variables, std::vector<double>(d * d, 0.0)};
  for (std::size_t i = 0; i < d; ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < d; ++j) {
      double cov = 0.0;
      for (std::size_t t = 0; t < n; ++t) cov += centered[i][t] * centered[j][t];
      cov /= static_cast<double>(n);
      const double r = std::clamp(cov / (sd[i] * sd[j]), -1.0, 1.0);
      m(i, j) = r;
      m(j, i) = r;
    }
  }
  return m;
}

FeatureSet select_features(const CorrelationMatrix& matrix, double pair_threshold,
                           const std::vector<std::string>& class_names) {
  if (!(pair_threshold > 0.0 && pair_threshold < 1.0))
    throw ConfigError("pair_threshold must lie in (0, 1), got " + format_double(pair_threshold));
  std::vector<std::size_t> classes;
  for (const auto& c : class_names) {
    const auto idx = matrix.index_of(c);
    if (!idx) throw SchemaError("correlation matrix lacks class '" + c + "'");
    classes.push_back(*idx);
  }
  std::vector<std::size_t> features;
  for (std::size_t i = 0; i < matrix.size(); ++i)
    if (std::find(classes.begin(), classes.end(), i) == classes.end()) features.push_back(i);
  if (features.empty()) throw ConfigError("correlation matrix has no feature variables");

  std::vector<double> relevance(matrix.size(), 0.0);
  for (std::size_t f : features)
    for (std::size_t c : classes) relevance[f] = std::max(relevance[f], std::abs(matrix(f, c)));

  struct Pair {
    std::size_t a, b;  // positions in `features`, a < b
    double r;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < features.size(); ++a)
    for (std::size_t b = a + 1; b < features.size(); ++b)
      pairs.push_back({a, b, std::abs(matrix(features[a], features[b]))});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.r > y.r; });

  FeatureSet out;
  out.threshold = pair_threshold;
  std::vector<bool> alive(features.size(), true);
  for (const auto& p : pairs) {
    if (!(p.r > pair_threshold)) break;
    if (!alive[p.a] || !alive[p.b]) continue;
    const double ra = relevance[features[p.a]], rb = relevance[features[p.b]];
    const std::size_t drop = ra < rb ? p.a : p.b;
    const std::size_t keep = drop == p.a ? p.b : p.a;
    alive[drop] = false;
    out.dropped.push_back({matrix.names[features[drop]], matrix.names[features[keep]], p.r, relevance[features[drop]]});
  }
  for (std::size_t a = 0; a < features.size(); ++a)
    if (alive[a]) out.names.push_back(matrix.names[features[a]]);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const MissingReport& r) {
  j = nlohmann::json{{"rows", r.rows}, {"total_missing", r.total()}, {"channels", nlohmann::json::array()}};
  for (const auto& c : r.channels) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : c.runs) runs.push_back({{"start", run.start}, {"length", run.length}});
    j["channels"].push_back({{"name", c.name}, {"missing", c.count}, {"runs", runs}});
  }
}

void to_json(nlohmann::json& j, const CorrelationMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < m.size(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  j = nlohmann::json{{"variables", m.names}, {"pearson_r", rows}};
}

void from_json(const nlohmann::json& j, CorrelationMatrix& m) {
  m.names = j.at("variables").get<std::vector<std::string>>();
  const auto& rows = j.at("pearson_r");
  if (rows.size() != m.names.size()) throw SchemaError("correlation matrix is not square");
  m.values.clear();
  for (const auto& row : rows) {
    if (row.size() != m.names.size()) throw SchemaError("correlation matrix is not square");
    for (const auto& v : row) m.values.push_back(v.get<double>());
  }
}

void to_json(nlohmann::json& j, const FeatureSet& f) {
  j = nlohmann::json{{"features", f.names}, {"pair_threshold", f.threshold}, {"dropped", nlohmann::json::array()}};
  for (const auto& d : f.dropped)
    j["dropped"].push_back(
        {{"name", d.name}, {"correlated_with", d.partner}, {"pair_abs_r", d.pair_r}, {"max_abs_r_to_class", d.class_r}});
}

void from_json(const nlohmann::json& j, FeatureSet& f) {
  f.names = j.at("features").get<std::vector<std::string>>();
  f.threshold = j.value("pair_threshold", 0.0);
  f.dropped.clear();
  if (j.contains("dropped"))
    for (const auto& d : j.at("dropped"))
      f.dropped.push_back({d.at("name").get<std::string>(), d.at("correlated_with").get<std::string>(),
                           d.at("pair_abs_r").get<double>(), d.at("max_abs_r_to_class").get<double>()});
  if (f.names.empty()) throw SchemaError("feature set is empty");
}

}  // namespace roomsense
