#include "run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>

#include "roomsense/error.hpp"
#include "roomsense/io.hpp"

namespace roomsense::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void merge_checked(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : patch.items()) {
    const std::string dotted = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown key '" + dotted + "'");
    auto& slot = base[key];
    const bool opaque = prefix.empty() && std::find(kOpaqueKeys.begin(), kOpaqueKeys.end(), key) != kOpaqueKeys.end();
    if (!opaque && slot.is_object() && value.is_object() && !slot.empty())
      merge_checked(slot, value, dotted);
    else
      slot = value;
  }
}

json parse_flag_value(const std::string& text) {
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) return text;
  return parsed;
}

namespace {

json nested_patch(const std::string& dotted, const json& value) {
  json patch = value;
  std::string rest = dotted;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  return patch;
}

}  // namespace

json resolve(const json& defaults, const RunRequest& request) {
  json cfg = defaults;
  if (request.config_path) {
    json file;
    try {
      file = io::read_json(*request.config_path);
    } catch (const json::exception& e) {
      throw ConfigError(*request.config_path + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    merge_checked(cfg, file);
  }
  if (const char* env = std::getenv("ROOMSENSE_OUT"); env && *env) cfg["out"] = env;
  if (const char* env = std::getenv("ROOMSENSE_THREADS"); env && *env && cfg.contains("threads"))
    cfg["threads"] = parse_flag_value(env);
  for (const auto& [key, text] : request.flags) merge_checked(cfg, json{{key, parse_flag_value(text)}});
  for (const auto& set : request.sets) {
    const auto eq = set.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + set + "'");
    merge_checked(cfg, nested_patch(set.substr(0, eq), parse_flag_value(set.substr(eq + 1))));
  }
  if (request.seed) cfg["seed"] = *request.seed;
  if (request.out) cfg["out"] = *request.out;
  return cfg;
}

RunContext::RunContext(std::string command, fs::path out, bool dry_run)
    : command_(std::move(command)), out_(std::move(out)), dry_run_(dry_run), start_(std::chrono::steady_clock::now()) {}

std::string RunContext::path(const std::string& name) const { return (out_ / name).string(); }

std::string RunContext::dir(const std::string& sub) const {
  const fs::path p = sub.empty() ? out_ : out_ / sub;
  fs::create_directories(p);
  return p.string();
}

json RunContext::meta() const {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  return {{"tool", "roomsense"}, {"version", kVersion}, {"command", command_}, {"created", stamp}, {"seconds", seconds}};
}

void RunContext::write_report(const std::string& name, json doc) const {
  dir();
  if (doc.is_object() && doc.contains("meta") && doc["meta"].is_object())
    doc["meta"].update(meta());
  else
    doc["meta"] = meta();
  io::write_json(path(name), doc);
}

void RunContext::write_text(const std::string& name, const std::string& text) const {
  dir();
  io::write_text(path(name), text);
}

}  // namespace roomsense::cli
