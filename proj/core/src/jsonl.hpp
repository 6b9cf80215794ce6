#pragma once

// Shared helpers for the line-oriented JSON and CSV formats.

#include <cstdint>
#include <istream>
#include <limits>
#include <string>

#include <json.hpp>

#include "actdet/error.hpp"

namespace actdet::detail {

// Calls fn(json, line_number) for every non-blank line. JSON syntax errors
// become ParseError with the offending line.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
    fn(j, line);
  }
  if (in.bad()) throw Error("read error after line " + std::to_string(line));
}

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                           std::size_t line) {
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field \"") + key + "\"");
  return *it;
}

inline std::int64_t require_int(const nlohmann::json& j, const char* key, std::size_t line) {
  const auto& v = require_field(j, key, line);
  if (v.is_number_unsigned()) {
    if (v.get<std::uint64_t>() > std::uint64_t(std::numeric_limits<std::int64_t>::max())) {
      throw ParseError(line, std::string("field \"") + key + "\" out of range");
    }
    return static_cast<std::int64_t>(v.get<std::uint64_t>());
  }
  if (!v.is_number_integer()) {
    throw ParseError(line, std::string("field \"") + key + "\" must be an integer");
  }
  return v.get<std::int64_t>();
}

inline double require_number(const nlohmann::json& j, const char* key, std::size_t line) {
  const auto& v = require_field(j, key, line);
  if (!v.is_number()) throw ParseError(line, std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

inline std::string require_string(const nlohmann::json& j, const char* key, std::size_t line) {
  const auto& v = require_field(j, key, line);
  if (!v.is_string()) throw ParseError(line, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace actdet::detail
