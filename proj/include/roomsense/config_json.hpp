#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>

#include "json.hpp"
#include "roomsense/error.hpp"

namespace roomsense {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

/// Throws ConfigError naming the first key of `j` not in `keys`.
inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
      throw ConfigError(what + " config has unknown key '" + k + "'");
}

}  // namespace roomsense
