#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wavecast/errors.hpp"

namespace wavecast {

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Parses `key=value` lines; '#' starts a comment line. Later keys override earlier ones.
inline std::vector<std::pair<std::string, std::string>> parse_kv_lines(const std::string& text,
                                                                       const std::string& what) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw FormatError(what + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& key) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size() || errno == ERANGE) {
    throw ConfigError("key '" + key + "': '" + s + "' is not a number");
  }
  return v;
}

inline long long parse_int(const std::string& s, const std::string& key) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(begin, &end, 10);
  if (s.empty() || end != begin + s.size() || errno == ERANGE) {
    throw ConfigError("key '" + key + "': '" + s + "' is not an integer");
  }
  return v;
}

inline std::size_t parse_count(const std::string& s, const std::string& key) {
  const long long v = parse_int(s, key);
  if (v < 0) throw ConfigError("key '" + key + "' must be non-negative, got " + s);
  return static_cast<std::size_t>(v);
}

/// Strict lookup over a parsed key=value block: every key must be consumed.
class KvReader {
 public:
  KvReader(const std::vector<std::pair<std::string, std::string>>& kv, std::string what) : what_(std::move(what)) {
    for (const auto& [k, v] : kv) values_[k] = v;
  }

  const std::string& str(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw FormatError(what_ + ": missing key '" + key + "'");
    used_[key] = true;
    return it->second;
  }
  double real(const std::string& key) { return parse_double(str(key), key); }
  std::size_t count(const std::string& key) { return parse_count(str(key), key); }

  void finish() const {
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) throw FormatError(what_ + ": unknown key '" + k + "'");
    }
  }

 private:
  std::string what_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> used_;
};

}  // namespace wavecast
