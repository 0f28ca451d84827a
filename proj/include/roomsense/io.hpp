#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace roomsense::io {

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

nlohmann::json read_json(const std::string& path);
/// Two-space indented, trailing newline. Key order is nlohmann's sorted
/// order, so equal documents serialize to equal bytes.
void write_json(const std::string& path, const nlohmann::json& doc);

/// Little-endian IEEE-754 binary64 payloads.
void write_f64(const std::string& path, const std::vector<double>& values);
std::vector<double> read_f64(const std::string& path);
void append_f64_le(std::string& out, double v);
double load_f64_le(const char* p);

}  // namespace roomsense::io
