#include "roomsense/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "roomsense/error.hpp"

namespace roomsense::io {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write to '" + path + "' failed");
}

nlohmann::json read_json(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

void append_f64_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.append(bytes, 8);
}

double load_f64_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

void write_f64(const std::string& path, const std::vector<double>& values) {
  std::string blob;
  blob.reserve(values.size() * 8);
  for (double v : values) append_f64_le(blob, v);
  write_text(path, blob);
}

std::vector<double> read_f64(const std::string& path) {
  const std::string blob = read_text(path);
  if (blob.size() % 8 != 0) throw SchemaError("'" + path + "' is not a whole number of f64 values");
  std::vector<double> values(blob.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = load_f64_le(blob.data() + 8 * i);
  return values;
}

}  // namespace roomsense::io
