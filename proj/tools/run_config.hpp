#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace roomsense::cli {

/// Keys whose values are replaced wholesale instead of merged key by key
/// (a model document switching kind must not inherit the old kind's keys).
inline const std::vector<std::string> kOpaqueKeys = {"model", "architecture", "space", "autoencoder", "head"};

/// Recursive merge of `patch` into `base`. Objects merge, everything else
/// replaces. Keys of `patch` that `base` lacks are rejected with a
/// ConfigError naming the dotted key.
void merge_checked(nlohmann::json& base, const nlohmann::json& patch, const std::string& prefix = "");

/// Flag text to JSON: valid JSON stays as parsed, anything else is a string.
nlohmann::json parse_flag_value(const std::string& text);

/// Inputs to config resolution, lowest precedence first.
struct RunRequest {
  std::string command;
  std::optional<std::string> config_path;
  std::map<std::string, std::string> flags;  // top-level key -> flag text
  std::vector<std::string> sets;             // "dotted.key=value"
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool dry_run = false;
};

/// Defaults <- config file <- ROOMSENSE_OUT <- flags. Returns the merged
/// document; "out" is always filled.
nlohmann::json resolve(const nlohmann::json& defaults, const RunRequest& request);

/// Writes outputs for one run and stamps the normalized metadata block.
class RunContext {
 public:
  RunContext(std::string command, std::filesystem::path out, bool dry_run);

  const std::filesystem::path& out() const noexcept { return out_; }
  bool dry_run() const noexcept { return dry_run_; }
  std::string path(const std::string& name) const;

  /// Creates the output directory (and `sub` inside it) on first use.
  std::string dir(const std::string& sub = "") const;

  /// `doc` plus a "meta" block (command, tool version, UTC time, elapsed
  /// seconds). Everything outside "meta" depends only on the config.
  void write_report(const std::string& name, nlohmann::json doc) const;
  void write_text(const std::string& name, const std::string& text) const;
  nlohmann::json meta() const;

 private:
  std::string command_;
  std::filesystem::path out_;
  bool dry_run_;
  std::chrono::steady_clock::time_point start_;
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace roomsense::cli
