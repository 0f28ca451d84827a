#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "roomsense/config_json.hpp"
#include "roomsense/error.hpp"
#include "roomsense/frame.hpp"
#include "roomsense/io.hpp"
#include "roomsense/metrics.hpp"
#include "roomsense/models.hpp"
#include "roomsense/pca.hpp"
#include "roomsense/pipeline.hpp"
#include "roomsense/rng.hpp"
#include "roomsense/search.hpp"
#include "roomsense/synth.hpp"
#include "roomsense/timeline.hpp"
#include "roomsense/train.hpp"

namespace roomsense::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kDefaultClasses = {std::string(kPersonLabel), std::string(kWindowLabel)};

// ---------------------------------------------------------------------------
// config helpers

std::string path_of(const json& cfg, const char* key) {
  if (!cfg.contains(key) || !cfg.at(key).is_string() || cfg.at(key).get<std::string>().empty())
    throw ConfigError(std::string("key '") + key + "' must name a path");
  return cfg.at(key).get<std::string>();
}

bool present(const json& cfg, const char* key) { return cfg.contains(key) && !cfg.at(key).is_null(); }

// A key that may hold a document inline or a path to one; paths are read so
// the resolved config is self-contained.
void inline_document(json& cfg, const char* key) {
  if (!cfg.at(key).is_string()) return;
  const std::string p = cfg.at(key).get<std::string>();
  try {
    cfg[key] = io::read_json(p);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("key '") + key + "': cannot read '" + p + "': " + e.what());
  }
}

template <class Fn>
void checked(const char* key, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

void require_positive(const json& cfg, const char* key) {
  checked(key, [&] {
    if (!cfg.at(key).is_number_integer() || cfg.at(key).get<std::int64_t>() <= 0)
      throw ConfigError("must be a positive integer");
  });
}

void require_fraction(const json& cfg, const char* key, bool allow_zero) {
  checked(key, [&] {
    const double v = cfg.at(key).get<double>();
    if (!(v < 1.0) || (allow_zero ? v < 0.0 : v <= 0.0)) throw ConfigError("must lie in " + std::string(allow_zero ? "[0, 1)" : "(0, 1)"));
  });
}

void require_threshold(const json& cfg) {
  checked("threshold", [&] {
    const double t = cfg.at("threshold").get<double>();
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("must lie in (0, 1)");
  });
}

std::optional<std::uint64_t> top_seed(const json& cfg) {
  if (!present(cfg, "seed")) return std::nullopt;
  std::uint64_t s = 0;
  checked("seed", [&] { s = cfg.at("seed").get<std::uint64_t>(); });
  return s;
}

// The top-level seed, when given, replaces every nested seed.
void propagate_seed(json& cfg, std::initializer_list<const char*> nested) {
  const auto seed = top_seed(cfg);
  if (!seed) return;
  for (const char* key : nested)
    if (cfg.at(key).is_object()) cfg[key]["seed"] = *seed;
}

WindowSpec window_spec(const json& j) {
  reject_unknown(j, {"length", "stride", "position"}, "window");
  WindowSpec w;
  w.length = get_or(j, "length", w.length);
  w.stride = get_or(j, "stride", w.stride);
  w.position = parse_label_position(get_or<std::string>(j, "position", to_string(w.position)));
  if (w.length == 0 || w.stride == 0) throw ConfigError("window length and stride must be positive");
  return w;
}

json window_json(const WindowSpec& w) {
  return {{"length", w.length}, {"stride", w.stride}, {"position", to_string(w.position)}};
}

TrainConfig fit_config(const json& cfg) {
  TrainConfig c;
  checked("fit", [&] {
    c = cfg.at("fit").get<TrainConfig>();
    c.validate();
  });
  return c;
}

std::vector<std::string> string_list(const json& cfg, const char* key) {
  std::vector<std::string> out;
  checked(key, [&] { out = cfg.at(key).get<std::vector<std::string>>(); });
  return out;
}

std::string windows_base(std::string p) {
  for (const char* ext : {".json", ".bin"})
    if (p.size() > 5 && p.ends_with(ext)) return p.substr(0, p.size() - std::string(ext).size());
  return p;
}

WindowSet load_window_file(const json& cfg, const char* key) { return load_windows(windows_base(path_of(cfg, key))); }

ScalerKind scaler_kind(const json& cfg) {
  ScalerKind k{};
  checked("scaler", [&] { k = parse_scaler_kind(cfg.at("scaler").get<std::string>()); });
  return k;
}

// Classifier architecture with the data-dependent fields filled in.
json complete_architecture(json arch, std::size_t channels, std::size_t classes) {
  auto& c = arch["config"];
  if (!c.contains("in_channels")) c["in_channels"] = channels;
  if (!c.contains("classes")) c["classes"] = classes;
  return arch;
}

void validate_classifier_architecture(json& cfg, const char* key) {
  inline_document(cfg, key);
  checked(key, [&] {
    const json& arch = cfg.at(key);
    reject_unknown(arch, {"kind", "config"}, "model");
    const auto kind = arch.at("kind").get<std::string>();
    if (kind == "autoencoder" || kind == "encoder_classifier")
      throw ConfigError("kind '" + kind + "' is trained with pretrain-ae and train-head");
    build_model(complete_architecture(arch, 9, 2), 0);
  });
}

void print_metrics(const Metrics& m) {
  for (const auto& c : m.classes)
    std::cout << "  " << c.name << ": precision " << c.precision << ", recall " << c.recall << ", F1 " << c.f1
              << " (support " << c.support << ")\n";
  std::cout << "  accuracy " << m.accuracy << " over " << m.n << " windows\n";
  for (const auto& w : m.warnings) std::cout << "  warning: " << w << "\n";
}

// ---------------------------------------------------------------------------
// model directories: classifier members, scaler and the input contract

struct Bundle {
  Classifier classifier;
  ScalerParams scaler;
  std::vector<std::string> channels, classes;
  WindowSpec window;
};

void save_bundle(const std::string& dir, const Classifier& c, const ScalerParams& scaler, const WindowSet& train,
                 const WindowSpec& window) {
  save_classifier(dir, c);
  io::write_json(dir + "/scaler.json", scaler);
  io::write_json(dir + "/inputs.json",
                 {{"channels", train.channels}, {"classes", train.classes}, {"window", window_json(window)}});
}

Bundle load_bundle(const std::string& dir) {
  if (!fs::is_directory(dir)) throw SchemaError("'" + dir + "' is not a model directory");
  Bundle b;
  b.classifier = load_classifier(dir);
  b.scaler = io::read_json(dir + "/scaler.json").get<ScalerParams>();
  const json inputs = io::read_json(dir + "/inputs.json");
  b.channels = inputs.at("channels").get<std::vector<std::string>>();
  b.classes = inputs.at("classes").get<std::vector<std::string>>();
  b.window = window_spec(inputs.at("window"));
  return b;
}

void check_inputs(const Bundle& b, const WindowSet& w) {
  if (w.channels != b.channels) throw SchemaError("windows carry different channels than the model was trained on");
  if (!w.classes.empty() && w.classes != b.classes)
    throw SchemaError("windows carry different classes than the model was trained on");
}

// The window length and label position the windows were cut with.
WindowSpec spec_of(const WindowSet& w, std::size_t stride = 1) { return {w.length(), stride, w.position}; }

json histories_json(const std::vector<History>& hs) {
  json members = json::array();
  for (const auto& h : hs) members.push_back(h);
  return {{"members", members}};
}

void write_histories(const RunContext& ctx, const std::vector<History>& hs) {
  ctx.write_report("history.json", histories_json(hs));
  for (std::size_t i = 0; i < hs.size(); ++i) ctx.write_text("history" + std::to_string(i) + ".csv", history_csv(hs[i]));
}

void write_evaluation(const RunContext& ctx, const Evaluation& e, double threshold) {
  json doc = e;
  doc["threshold"] = threshold;
  ctx.write_report("evaluation.json", doc);
  ctx.write_text("evaluation.csv", evaluation_csv(e));
  std::cout << "evaluation:\n";
  print_metrics(e.metrics);
}

std::vector<std::string> csv_inputs(const json& cfg) {
  std::vector<std::string> paths;
  for (const auto& p : string_list(cfg, "inputs")) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".csv") found.push_back(entry.path().string());
      std::sort(found.begin(), found.end());
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      paths.push_back(p);
    }
  }
  if (paths.empty()) throw SchemaError("no CSV inputs found");
  return paths;
}

// ---------------------------------------------------------------------------
// commands

Command synth_command() {
  json defaults = {{"scenario", ScenarioConfig{}}, {"devices", 1}, {"seed", nullptr}, {"out", "out"}};
  return {"synth", "Generate a labelled scenario or an unlabelled device fleet as CSV", defaults,
          [](json& cfg) {
            inline_document(cfg, "scenario");
            propagate_seed(cfg, {"scenario"});
            checked("scenario", [&] { cfg.at("scenario").get<ScenarioConfig>().validate(); });
            require_positive(cfg, "devices");
          },
          [](const json& cfg, const RunContext& ctx) {
            const auto scenario = cfg.at("scenario").get<ScenarioConfig>();
            const auto devices = cfg.at("devices").get<std::size_t>();
            json summary = {{"devices", devices}, {"files", json::array()}};
            if (devices == 1) {
              const SensorFrame f = generate_frame(scenario);
              ctx.dir();
              write_frame_csv(ctx.path("frame.csv"), f);
              summary["files"].push_back("frame.csv");
              summary["rows"] = f.rows();
              for (const auto& l : f.labels) {
                std::size_t positive = 0;
                for (auto v : l.values) positive += v > 0;
                summary["positive_rows"][l.name] = positive;
              }
            } else {
              const auto fleet = generate_fleet(scenario, devices);
              const std::string dir = ctx.dir("fleet");
              std::size_t rows = 0;
              for (const auto& f : fleet) {
                write_frame_csv(dir + "/" + f.device_id + ".csv", f);
                summary["files"].push_back("fleet/" + f.device_id + ".csv");
                rows += f.rows();
              }
              summary["rows"] = rows;
            }
            ctx.write_report("synth.json", summary);
            std::cout << "generated " << summary["rows"].get<std::size_t>() << " rows on " << devices << " device(s)\n";
          }};
}

Command clean_command() {
  const CsvSchema s;
  json schema = {{"timestamp_column", s.timestamp_column},
                 {"label_columns", s.label_columns},
                 {"rename", json::object()},
                 {"device_id", ""}};
  json defaults = {{"input", nullptr}, {"edge_policy", "trim"}, {"binarize_person", true},
                   {"schema", schema}, {"seed", nullptr},       {"out", "out"}};
  return {"clean", "Interpolate missing values and binarize the person count", defaults,
          [](json& cfg) {
            path_of(cfg, "input");
            checked("edge_policy", [&] {
              const auto p = cfg.at("edge_policy").get<std::string>();
              if (p != "trim" && p != "extend") throw ConfigError("expected 'trim' or 'extend', got '" + p + "'");
            });
            checked("binarize_person", [&] { cfg.at("binarize_person").get<bool>(); });
            checked("schema", [&] {
              const auto& j = cfg.at("schema");
              j.at("timestamp_column").get<std::string>();
              j.at("label_columns").get<std::vector<std::string>>();
              j.at("rename").get<std::map<std::string, std::string>>();
              j.at("device_id").get<std::string>();
            });
          },
          [](const json& cfg, const RunContext& ctx) {
            const auto& sj = cfg.at("schema");
            CsvSchema schema;
            schema.timestamp_column = sj.at("timestamp_column").get<std::string>();
            schema.label_columns = sj.at("label_columns").get<std::vector<std::string>>();
            schema.rename = sj.at("rename").get<std::map<std::string, std::string>>();
            schema.device_id = sj.at("device_id").get<std::string>();
            const SensorFrame raw = read_frame_csv(path_of(cfg, "input"), schema);
            const auto before = missing_report(raw);
            const auto policy = cfg.at("edge_policy") == "trim" ? EdgePolicy::trim : EdgePolicy::extend;
            SensorFrame clean = interpolate_missing(raw, policy);
            const bool binarize = cfg.at("binarize_person").get<bool>() && clean.find_label(kPersonLabel);
            if (binarize) clean = binarize_person(clean);
            ctx.dir();
            write_frame_csv(ctx.path("clean.csv"), clean);
            ctx.write_report("clean.json", {{"rows_in", raw.rows()},
                                            {"rows_out", clean.rows()},
                                            {"filled", before.total()},
                                            {"binarized", binarize},
                                            {"missing_before", before}});
            std::cout << "cleaned " << raw.rows() << " rows -> " << clean.rows() << ", filled " << before.total()
                      << " missing values\n";
          }};
}

Command report_missing_command() {
  json defaults = {{"input", nullptr}, {"seed", nullptr}, {"out", "out"}};
  return {"report-missing", "Count and locate missing values per channel", defaults,
          [](json& cfg) { path_of(cfg, "input"); },
          [](const json& cfg, const RunContext& ctx) {
            const auto report = missing_report(read_frame_csv(path_of(cfg, "input")));
            ctx.write_report("missing.json", report);
            std::cout << report.total() << " missing values over " << report.rows << " rows\n";
            for (const auto& c : report.channels)
              if (c.count) std::cout << "  " << c.name << ": " << c.count << " in " << c.runs.size() << " run(s)\n";
          }};
}

std::string correlation_csv(const CorrelationMatrix& m) {
  std::ostringstream os;
  os.precision(17);
  os << "variable";
  for (const auto& n : m.names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << m.names[i];
    for (std::size_t j = 0; j < m.size(); ++j) os << ',' << m(i, j);
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> all_variables(const SensorFrame& f) {
  auto vars = f.channel_names();
  for (const auto& l : f.labels) vars.push_back(l.name);
  return vars;
}

Command correlate_command() {
  json defaults = {{"input", nullptr}, {"variables", nullptr}, {"seed", nullptr}, {"out", "out"}};
  return {"correlate", "Pearson correlation matrix over channels and labels", defaults,
          [](json& cfg) {
            path_of(cfg, "input");
            if (present(cfg, "variables")) string_list(cfg, "variables");
          },
          [](const json& cfg, const RunContext& ctx) {
            const SensorFrame f = read_frame_csv(path_of(cfg, "input"));
            const auto vars = present(cfg, "variables") ? string_list(cfg, "variables") : all_variables(f);
            const auto m = pearson_matrix(f, vars);
            ctx.write_report("correlation.json", {{"matrix", m}});
            ctx.write_text("correlation.csv", correlation_csv(m));
            std::cout << "correlated " << m.size() << " variables over " << f.rows() << " rows\n";
          }};
}

Command select_features_command() {
  json defaults = {{"input", nullptr},
                   {"pair_threshold", kDefaultPairThreshold},
                   {"classes", kDefaultClasses},
                   {"seed", nullptr},
                   {"out", "out"}};
  return {"select-features", "Drop channels that are highly correlated with a more informative one", defaults,
          [](json& cfg) {
            path_of(cfg, "input");
            checked("pair_threshold", [&] {
              const double t = cfg.at("pair_threshold").get<double>();
              if (!(t > 0.0 && t <= 1.0)) throw ConfigError("must lie in (0, 1]");
            });
            if (string_list(cfg, "classes").empty()) throw ConfigError("key 'classes' must not be empty");
          },
          [](const json& cfg, const RunContext& ctx) {
            const SensorFrame f = read_frame_csv(path_of(cfg, "input"));
            const auto classes = string_list(cfg, "classes");
            auto vars = f.channel_names();
            vars.insert(vars.end(), classes.begin(), classes.end());
            const auto fs = select_features(pearson_matrix(f, vars), cfg.at("pair_threshold").get<double>(), classes);
            ctx.write_report("features.json", fs);
            std::cout << "kept " << fs.names.size() << " feature(s):";
            for (const auto& n : fs.names) std::cout << ' ' << n;
            std::cout << "\n";
            for (const auto& d : fs.dropped)
              std::cout << "  dropped " << d.name << " (r = " << d.pair_r << " with " << d.partner << ")\n";
          }};
}

std::vector<std::string> feature_names(const json& cfg) {
  const auto& f = cfg.at("features");
  if (f.is_array()) return string_list(cfg, "features");
  // a features.json written by select-features
  return io::read_json(f.get<std::string>()).get<FeatureSet>().names;
}

Command sample_command() {
  json defaults = {{"input", nullptr},        {"features", nullptr}, {"classes", kDefaultClasses},
                   {"context", kDefaultContext}, {"max_gap", kDefaultMaxGap},  {"window", window_json({})},
                   {"seed", nullptr},         {"out", "out"}};
  return {"sample", "Cut a cleaned frame into labelled windows, optionally under-sampled", defaults,
          [](json& cfg) {
            path_of(cfg, "input");
            checked("features", [&] {
              const auto& f = cfg.at("features");
              if (!f.is_null() && !f.is_string() && !f.is_array())
                throw ConfigError("must be null, a list of channels or a features.json path");
              if (f.is_array()) f.get<std::vector<std::string>>();
            });
            const auto classes = string_list(cfg, "classes");
            checked("context", [&] { cfg.at("context").get<std::size_t>(); });
            if (classes.empty() && cfg.at("context").get<std::size_t>() > 0)
              throw ConfigError("key 'context': under-sampling needs at least one class");
            checked("max_gap", [&] {
              if (cfg.at("max_gap").get<std::int64_t>() <= 0) throw ConfigError("must be positive");
            });
            checked("window", [&] { window_spec(cfg.at("window")); });
          },
          [](const json& cfg, const RunContext& ctx) {
            SensorFrame f = read_frame_csv(path_of(cfg, "input"));
            if (present(cfg, "features")) f = f.select_channels(feature_names(cfg));
            const auto classes = string_list(cfg, "classes");
            const auto context = cfg.at("context").get<std::size_t>();
            const auto spec = window_spec(cfg.at("window"));
            auto segments = split_on_gaps(f, cfg.at("max_gap").get<std::int64_t>());
            if (context > 0) segments = intersect(segments, undersample(label_matrix(f, classes), context));
            const WindowSet w = build_windows(f, segments, spec, classes);
            ctx.dir();
            save_windows(ctx.path("windows"), w);
            std::size_t rows = 0;
            for (const auto& s : segments) rows += s.length();
            json positives = json::object();
            for (std::size_t k = 0; k < w.classes.size(); ++k) {
              std::size_t n = 0;
              for (std::size_t i = 0; i < w.count(); ++i) n += w.y(i, k);
              positives[w.classes[k]] = n;
            }
            ctx.write_report("sampling.json", {{"segments", segments.size()},
                                               {"rows_kept", rows},
                                               {"rows", f.rows()},
                                               {"windows", w.count()},
                                               {"positive_windows", positives}});
            std::cout << "kept " << rows << " of " << f.rows() << " rows in " << segments.size() << " segment(s), "
                      << w.count() << " windows\n";
          }};
}

Command split_command() {
  json defaults = {{"input", nullptr},        {"mode", "time"},       {"cut", nullptr},
                   {"cut_fraction", 0.8},     {"ratios", {0.7, 0.2, 0.1}}, {"valid_fraction", 0.2},
                   {"seed", 7},               {"out", "out"}};
  return {"split", "Time split of a frame, or random/holdout split of a window set", defaults,
          [](json& cfg) {
            path_of(cfg, "input");
            top_seed(cfg);
            std::string mode;
            checked("mode", [&] {
              mode = cfg.at("mode").get<std::string>();
              if (mode != "time" && mode != "random" && mode != "holdout")
                throw ConfigError("expected 'time', 'random' or 'holdout', got '" + mode + "'");
            });
            if (mode == "time") {
              if (present(cfg, "cut")) checked("cut", [&] { cfg.at("cut").get<std::int64_t>(); });
              else require_fraction(cfg, "cut_fraction", false);
            } else if (mode == "random") {
              checked("ratios", [&] {
                const auto r = cfg.at("ratios").get<std::vector<double>>();
                if (r.size() != 3) throw ConfigError("expected three ratios");
                double sum = 0;
                for (double v : r) {
                  if (v < 0) throw ConfigError("ratios must be non-negative");
                  sum += v;
                }
                if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("ratios must sum to 1");
              });
            } else {
              require_fraction(cfg, "valid_fraction", false);
            }
          },
          [](const json& cfg, const RunContext& ctx) {
            const auto mode = cfg.at("mode").get<std::string>();
            const std::uint64_t seed = top_seed(cfg).value_or(0);
            json summary = {{"mode", mode}};
            if (mode == "time") {
              const SensorFrame f = read_frame_csv(path_of(cfg, "input"));
              if (f.rows() < 2) throw SplitError("frame too short to split in time");
              std::int64_t cut = 0;
              if (present(cfg, "cut")) {
                cut = cfg.at("cut").get<std::int64_t>();
              } else {
                const auto row = static_cast<std::size_t>(static_cast<double>(f.rows()) * cfg.at("cut_fraction").get<double>());
                cut = f.timestamps[std::min(row, f.rows() - 1)];
              }
              const auto [a, b] = split_time(f, cut);
              ctx.dir();
              write_frame_csv(ctx.path("train.csv"), a);
              write_frame_csv(ctx.path("test.csv"), b);
              summary["cut"] = cut;
              summary["rows"] = {{"train", a.rows()}, {"test", b.rows()}};
              std::cout << "time split at " << cut << ": " << a.rows() << " / " << b.rows() << " rows\n";
            } else if (mode == "random") {
              SplitSpec spec;
              const auto r = cfg.at("ratios").get<std::vector<double>>();
              spec.ratios = {r[0], r[1], r[2]};
              spec.seed = seed;
              const auto parts = split_random(load_window_file(cfg, "input"), spec);
              ctx.dir();
              const char* names[] = {"train", "valid", "test"};
              for (std::size_t i = 0; i < 3; ++i) {
                save_windows(ctx.path(names[i]), parts[i]);
                summary["windows"][names[i]] = parts[i].count();
              }
              std::cout << "random split: " << parts[0].count() << " / " << parts[1].count() << " / "
                        << parts[2].count() << " windows\n";
            } else {
              const auto [train, valid] = holdout(load_window_file(cfg, "input"), cfg.at("valid_fraction").get<double>(), seed);
              ctx.dir();
              save_windows(ctx.path("train"), train);
              save_windows(ctx.path("valid"), valid);
              summary["windows"] = {{"train", train.count()}, {"valid", valid.count()}};
              std::cout << "holdout: " << train.count() << " / " << valid.count() << " windows\n";
            }
            ctx.write_report("split.json", summary);
          }};
}

json default_model() { return {{"kind", "fcn"}, {"config", {{"filters", {32, 8}}, {"kernels", {5, 3}}}}}; }

void validate_train_common(json& cfg) {
  path_of(cfg, "train");
  for (const char* key : {"valid", "test"})
    if (present(cfg, key)) path_of(cfg, key);
  propagate_seed(cfg, {"fit"});
  fit_config(cfg);
  scaler_kind(cfg);
  require_threshold(cfg);
}

struct ScaledData {
  ScalerParams scaler;
  WindowSet train, valid;
};

ScaledData scaled_inputs(const json& cfg, ScalerKind kind) {
  const WindowSet raw = load_window_file(cfg, "train");
  if (raw.classes.empty()) throw SchemaError("training windows carry no labels");
  ScaledData d;
  d.scaler = fit_scaler(kind, raw);
  d.train = transform(d.scaler, raw);
  if (present(cfg, "valid")) {
    const WindowSet v = load_window_file(cfg, "valid");
    if (v.channels != raw.channels || v.classes != raw.classes)
      throw SchemaError("validation windows do not match the training windows");
    d.valid = transform(d.scaler, v);
  } else {
    d.valid = d.train.subset({});
  }
  return d;
}

void evaluate_if_requested(const json& cfg, const RunContext& ctx, const Bundle& b) {
  if (!present(cfg, "test")) return;
  const WindowSet test = load_window_file(cfg, "test");
  check_inputs(b, test);
  const double thr = cfg.at("threshold").get<double>();
  write_evaluation(ctx, evaluate(b.classifier, transform(b.scaler, test), thr), thr);
}

Command train_command() {
  json defaults = {{"train", nullptr},      {"valid", nullptr},  {"test", nullptr},
                   {"model", default_model()}, {"scaler", "standard"}, {"fit", TrainConfig{}},
                   {"threshold", kDefaultThreshold}, {"seed", nullptr}, {"out", "out"}};
  return {"train", "Train an FCN, LSTM or InceptionTime classifier on window sets", defaults,
          [](json& cfg) {
            validate_train_common(cfg);
            validate_classifier_architecture(cfg, "model");
          },
          [](const json& cfg, const RunContext& ctx) {
            const auto data = scaled_inputs(cfg, scaler_kind(cfg));
            const json arch = complete_architecture(cfg.at("model"), data.train.channels.size(), data.train.classes.size());
            std::cout << "training " << arch.at("kind").get<std::string>() << " on " << data.train.count()
                      << " windows (" << data.valid.count() << " validation)\n";
            const auto trained = fit_classifier(arch, data.train, data.valid, fit_config(cfg));
            const std::string dir = ctx.dir("model");
            save_bundle(dir, trained.classifier, data.scaler, data.train, spec_of(data.train));
            write_histories(ctx, trained.histories);
            for (std::size_t i = 0; i < trained.histories.size(); ++i) {
              const auto& h = trained.histories[i];
              std::cout << "  member " << i << ": " << h.size() << " epoch(s), best epoch " << h.best_epoch
                        << (h.stopped_early ? ", stopped early" : "") << "\n";
            }
            Bundle b{trained.classifier, data.scaler, data.train.channels, data.train.classes, spec_of(data.train)};
            evaluate_if_requested(cfg, ctx, b);
            std::cout << "model written to " << dir << "\n";
          }};
}

Command tune_command() {
  json defaults = {{"train", nullptr},   {"valid", nullptr},     {"model", default_model()},
                   {"space", nullptr},   {"trials", 10},         {"threads", 1},
                   {"scaler", "standard"}, {"fit", TrainConfig{}}, {"seed", nullptr},
                   {"out", "out"}};
  return {"tune", "Random search over a hyper-parameter grid, scored by validation F1", defaults,
          [](json& cfg) {
            path_of(cfg, "train");
            path_of(cfg, "valid");
            propagate_seed(cfg, {"fit"});
            fit_config(cfg);
            scaler_kind(cfg);
            require_positive(cfg, "trials");
            require_positive(cfg, "threads");
            validate_classifier_architecture(cfg, "model");
            if (present(cfg, "space")) {
              inline_document(cfg, "space");
            } else {
              const auto& arch = cfg.at("model");
              const auto kind = arch.at("kind").get<std::string>();
              if (kind == "fcn")
                cfg["space"] = fcn_search_space(arch.at("config").value("filters", FcnConfig{}.filters).size());
              else if (kind == "lstm")
                cfg["space"] = lstm_search_space();
              else
                throw ConfigError("key 'space' is required for model kind '" + kind + "'");
            }
            checked("space", [&] { cfg.at("space").get<SearchSpace>().validate(); });
          },
          [](const json& cfg, const RunContext& ctx) {
            const auto data = scaled_inputs(cfg, scaler_kind(cfg));
            const json arch = complete_architecture(cfg.at("model"), data.train.channels.size(), data.train.classes.size());
            const auto cfg_fit = fit_config(cfg);
            const auto space = cfg.at("space").get<SearchSpace>();
            const auto trials = cfg.at("trials").get<std::size_t>();
            const std::size_t threads = cfg.at("threads").get<std::size_t>();
            std::cout << "tuning " << trials << " trial(s) over " << space.combinations() << " combinations on "
                      << threads << " thread(s)\n";
            const auto result = tune_classifier(arch, space, data.train, data.valid, cfg_fit, trials,
                                                cfg_fit.seed, threads);
            const auto& best = result.best_trial();
            ctx.write_report("search.json", result);
            ctx.write_text("search.csv", search_csv(result, data.train.classes));
            ctx.write_report("best.json", {{"architecture", apply_sample(arch, best.sample)},
                                           {"score", best.score},
                                           {"trial", best.index}});
            std::cout << "best trial " << best.index << ": " << best.sample.dump() << " score " << best.score << "\n";
          }};
}

Command pretrain_ae_command() {
  json defaults = {{"inputs", json::array()}, {"window", window_json({7, 5, LabelPosition::first})},
                   {"max_gap", kDefaultMaxGap}, {"autoencoder", json::object()},
                   {"scaler", "standard"},     {"fit", TrainConfig{}},
                   {"valid_fraction", 0.1},    {"seed", nullptr},
                   {"out", "out"}};
  return {"pretrain-ae", "Pretrain the recurrent autoencoder on unlabelled CSV files", defaults,
          [](json& cfg) {
            if (string_list(cfg, "inputs").empty()) throw ConfigError("key 'inputs' must list CSV files or directories");
            checked("window", [&] { window_spec(cfg.at("window")); });
            checked("max_gap", [&] {
              if (cfg.at("max_gap").get<std::int64_t>() <= 0) throw ConfigError("must be positive");
            });
            inline_document(cfg, "autoencoder");
            checked("autoencoder", [&] { cfg.at("autoencoder").get<AutoencoderConfig>(); });
            propagate_seed(cfg, {"fit"});
            fit_config(cfg);
            scaler_kind(cfg);
            require_fraction(cfg, "valid_fraction", true);
          },
          [](const json& cfg, const RunContext& ctx) {
            const auto spec = window_spec(cfg.at("window"));
            const auto max_gap = cfg.at("max_gap").get<std::int64_t>();
            WindowSet all;
            bool first = true;
            for (const auto& p : csv_inputs(cfg)) {
              const SensorFrame f = interpolate_missing(read_frame_csv(p));
              WindowSet w = build_windows(f, split_on_gaps(f, max_gap), spec, {});
              all = first ? std::move(w) : concat(all, w);
              first = false;
            }
            if (all.count() == 0) throw SplitError("inputs yield no windows");
            const auto scaler = fit_scaler(scaler_kind(cfg), all);
            const WindowSet scaled = transform(scaler, all);

            json ae_json = cfg.at("autoencoder");
            if (!ae_json.contains("in_channels")) ae_json["in_channels"] = all.channels.size();
            if (!ae_json.contains("length")) ae_json["length"] = spec.length;
            const auto fit = fit_config(cfg);
            auto model = build_autoencoder(ae_json.get<AutoencoderConfig>(), fit.seed);
            std::cout << "pretraining on " << scaled.count() << " windows of " << all.channels.size() << " channels\n";
            const History h = train_autoencoder(*model, scaled, fit, cfg.at("valid_fraction").get<double>());

            const std::string dir = ctx.dir("autoencoder");
            save_checkpoint(dir + "/autoencoder", *model, {fit.seed, 0});
            io::write_json(dir + "/scaler.json", scaler);
            io::write_json(dir + "/inputs.json", {{"channels", all.channels}, {"window", window_json(spec)}});
            write_histories(ctx, {h});
            const double mse = evaluate_loss(*model, scaled.x, scaled.x, Objective::mse);
            ctx.write_report("pretrain.json", {{"windows", scaled.count()},
                                               {"param_count", param_count(*model)},
                                               {"reconstruction_mse", mse},
                                               {"best_valid_loss", h.best_valid_loss()}});
            std::cout << "reconstruction MSE " << mse << " after " << h.size() << " epoch(s)\n";
          }};
}

Command train_head_command() {
  json defaults = {{"train", nullptr},       {"valid", nullptr},     {"test", nullptr},
                   {"autoencoder", nullptr}, {"head", json::object()}, {"labeled_fraction", 0.1},
                   {"fit", TrainConfig{}},   {"threshold", kDefaultThreshold}, {"seed", nullptr},
                   {"out", "out"}};
  return {"train-head", "Train a classifier head on a frozen pretrained encoder", defaults,
          [](json& cfg) {
            path_of(cfg, "train");
            for (const char* key : {"valid", "test"})
              if (present(cfg, key)) path_of(cfg, key);
            path_of(cfg, "autoencoder");
            inline_document(cfg, "head");
            checked("head", [&] { cfg.at("head").get<HeadConfig>(); });
            checked("labeled_fraction", [&] {
              const double f = cfg.at("labeled_fraction").get<double>();
              if (!(f > 0.0 && f <= 1.0)) throw ConfigError("must lie in (0, 1]");
            });
            propagate_seed(cfg, {"fit"});
            fit_config(cfg);
            require_threshold(cfg);
          },
          [](const json& cfg, const RunContext& ctx) {
            const std::string ae_dir = path_of(cfg, "autoencoder");
            const auto loaded = load_model(ae_dir + "/autoencoder");
            const auto* ae = dynamic_cast<const Autoencoder*>(loaded.get());
            if (!ae) throw SchemaError("'" + ae_dir + "' does not hold an autoencoder checkpoint");
            const auto scaler = io::read_json(ae_dir + "/scaler.json").get<ScalerParams>();
            const auto channels = io::read_json(ae_dir + "/inputs.json").at("channels").get<std::vector<std::string>>();

            const auto fit = fit_config(cfg);
            const WindowSet raw = load_window_file(cfg, "train");
            if (raw.channels != channels) throw SchemaError("training windows do not carry the autoencoder's channels");
            if (raw.classes.empty()) throw SchemaError("training windows carry no labels");
            const double fraction = cfg.at("labeled_fraction").get<double>();
            const WindowSet labeled = fraction < 1.0 ? holdout(raw, fraction, fit.seed).second : raw;
            const WindowSet train = transform(scaler, labeled);
            WindowSet valid = train.subset({});
            if (present(cfg, "valid")) {
              const WindowSet v = load_window_file(cfg, "valid");
              if (v.channels != channels || v.classes != raw.classes)
                throw SchemaError("validation windows do not match the training windows");
              valid = transform(scaler, v);
            }

            HeadConfig head = cfg.at("head").get<HeadConfig>();
            if (!cfg.at("head").contains("classes")) head.classes = raw.classes.size();
            std::cout << "training head on " << train.count() << " of " << raw.count() << " labelled windows\n";
            const ModelFactory factory = [&](std::uint64_t seed) { return build_encoder_classifier(*ae, head, seed); };
            const auto trained = fit_classifier(factory, train, valid, fit, 1);
            const std::string dir = ctx.dir("model");
            save_bundle(dir, trained.classifier, scaler, train, spec_of(train));
            write_histories(ctx, trained.histories);
            Bundle b{trained.classifier, scaler, train.channels, train.classes, spec_of(train)};
            evaluate_if_requested(cfg, ctx, b);
            std::cout << "model written to " << dir << "\n";
          }};
}

Command eval_command() {
  json defaults = {{"model", nullptr}, {"test", nullptr},  {"threshold", kDefaultThreshold},
                   {"architecture", nullptr}, {"seed", nullptr}, {"out", "out"}};
  return {"eval", "Per-class precision, recall and F1 of a trained model on a window set", defaults,
          [](json& cfg) {
            path_of(cfg, "model");
            path_of(cfg, "test");
            require_threshold(cfg);
            if (present(cfg, "architecture")) {
              inline_document(cfg, "architecture");
              checked("architecture", [&] { build_model(cfg.at("architecture"), 0); });
            }
          },
          [](const json& cfg, const RunContext& ctx) {
            const Bundle b = load_bundle(path_of(cfg, "model"));
            if (present(cfg, "architecture")) {
              const std::string expected = build_model(cfg.at("architecture"), 0)->fingerprint();
              for (const auto& m : b.classifier.members)
                if (m->fingerprint() != expected)
                  throw SchemaError("checkpoint architecture fingerprint " + m->fingerprint() +
                                    " does not match the configured architecture " + expected);
            }
            const WindowSet test = load_window_file(cfg, "test");
            check_inputs(b, test);
            const double thr = cfg.at("threshold").get<double>();
            write_evaluation(ctx, evaluate(b.classifier, transform(b.scaler, test), thr), thr);
          }};
}

void write_track(const RunContext& ctx, const PredictionTrack& t) {
  ctx.write_report("track.json", t);
  ctx.write_text("track.csv", track_csv(t));
  std::cout << t.predicted() << " of " << t.size() << " timestamps predicted\n";
  for (std::size_t k = 0; k < t.classes.size(); ++k) {
    const auto on = std::count(t.decision[k].begin(), t.decision[k].end(), 1);
    std::cout << "  " << t.classes[k] << ": " << on << " positive\n";
  }
  for (const auto& w : t.warnings) std::cout << "  warning: " << w << "\n";
}

Command predict_command() {
  json defaults = {{"model", nullptr},   {"input", nullptr},         {"threshold", kDefaultThreshold},
                   {"max_gap", kDefaultMaxGap}, {"smooth", 0}, {"seed", nullptr},
                   {"out", "out"}};
  return {"predict", "Per-timestamp predictions for a cleaned frame", defaults,
          [](json& cfg) {
            path_of(cfg, "model");
            path_of(cfg, "input");
            require_threshold(cfg);
            checked("max_gap", [&] {
              if (cfg.at("max_gap").get<std::int64_t>() <= 0) throw ConfigError("must be positive");
            });
            checked("smooth", [&] { cfg.at("smooth").get<std::size_t>(); });
          },
          [](const json& cfg, const RunContext& ctx) {
            const Bundle b = load_bundle(path_of(cfg, "model"));
            const SensorFrame f = read_frame_csv(path_of(cfg, "input"));
            PredictionTrack t = predict_timeline(b.classifier, f, b.window, b.scaler, b.classes,
                                                 cfg.at("threshold").get<double>(), cfg.at("max_gap").get<std::int64_t>());
            if (const auto w = cfg.at("smooth").get<std::size_t>(); w > 1) t = smooth(t, w);
            write_track(ctx, t);
          }};
}

Command smooth_command() {
  json defaults = {{"input", nullptr}, {"width", 5}, {"seed", nullptr}, {"out", "out"}};
  return {"smooth", "Flip short prediction runs enclosed by agreeing neighbours", defaults,
          [](json& cfg) {
            path_of(cfg, "input");
            require_positive(cfg, "width");
          },
          [](const json& cfg, const RunContext& ctx) {
            const auto track = io::read_json(path_of(cfg, "input")).get<PredictionTrack>();
            write_track(ctx, smooth(track, cfg.at("width").get<std::size_t>()));
          }};
}

Command pca_command() {
  json defaults = {{"model", nullptr}, {"windows", nullptr}, {"components", 2}, {"seed", nullptr}, {"out", "out"}};
  return {"pca", "Project a model's learned features onto their principal components", defaults,
          [](json& cfg) {
            path_of(cfg, "model");
            path_of(cfg, "windows");
            require_positive(cfg, "components");
          },
          [](const json& cfg, const RunContext& ctx) {
            const Bundle b = load_bundle(path_of(cfg, "model"));
            const WindowSet w = load_window_file(cfg, "windows");
            check_inputs(b, w);
            Model& m = *b.classifier.members.at(0);
            m.forward(transform(b.scaler, w).x, Mode::eval);
            const Tensor features = m.features();
            const auto model = pca_fit(features, cfg.at("components").get<std::size_t>());
            const Tensor projected = pca_project(model, features);
            std::vector<std::vector<int>> labels;
            for (std::size_t i = 0; i < w.count() && !w.classes.empty(); ++i) {
              std::vector<int> row;
              for (std::size_t k = 0; k < w.classes.size(); ++k) row.push_back(w.y(i, k));
              labels.push_back(std::move(row));
            }
            ctx.write_report("pca.json", {{"pca", model}, {"source", m.kind()}, {"points", w.count()}});
            ctx.write_text("projection.csv", projection_csv(projected, w.classes, labels));
            std::cout << "explained variance:";
            for (double e : model.explained) std::cout << ' ' << e;
            std::cout << "\n";
          }};
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<Command> all = {
      synth_command(),       clean_command(),      report_missing_command(), correlate_command(),
      select_features_command(), sample_command(), split_command(),          train_command(),
      tune_command(),        pretrain_ae_command(), train_head_command(),    eval_command(),
      predict_command(),     smooth_command(),     pca_command()};
  return all;
}

}  // namespace roomsense::cli
