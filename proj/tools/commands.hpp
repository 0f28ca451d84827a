#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "run_config.hpp"

namespace roomsense::cli {

struct Command {
  std::string name;
  std::string summary;
  nlohmann::json defaults;  // every accepted key with its default value
  /// Normalizes the resolved config in place (paths to documents, seed
  /// propagation) and throws ConfigError on invalid values. Must not touch
  /// the filesystem except to read referenced config documents.
  std::function<void(nlohmann::json&)> validate;
  std::function<void(const nlohmann::json&, const RunContext&)> run;
};

const std::vector<Command>& commands();

}  // namespace roomsense::cli
