#pragma once

// WGF v1: little-endian gridded field files, plus the plain-text manifest that
// indexes them ("<iso-time> <variable> <relative-path>" per line).

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "wavecast/errors.hpp"
#include "wavecast/grid.hpp"

namespace wavecast {

inline constexpr std::array<char, 4> kWgfMagic{'W', 'G', 'F', '1'};
inline constexpr std::uint32_t kWgfVersion = 1;
inline constexpr std::size_t kWgfHeaderBytes = 60;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; failures report the byte offset.
template <typename ErrorT>
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ErrorT(what_ + ": truncated at byte offset " + std::to_string(pos_) + " (need " + std::to_string(n) +
                   " more bytes, have " + std::to_string(bytes_.size() - pos_) + ")");
    }
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw ErrorT(what_ + ": " + msg + " at byte offset " + std::to_string(at));
  }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

inline std::vector<std::uint8_t> encode_wgf(const GridField& f) {
  f.validate();
  detail::ByteWriter w;
  w.raw(kWgfMagic.data(), 4);
  w.u32(kWgfVersion);
  w.u8(static_cast<std::uint8_t>(f.var));
  w.u8(static_cast<std::uint8_t>(f.units));
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(f.geom.lat_count));
  w.u32(static_cast<std::uint32_t>(f.geom.lon_count));
  w.f64(f.geom.lat0);
  w.f64(f.geom.dlat);
  w.f64(f.geom.lon0);
  w.f64(f.geom.dlon);
  w.i64(f.valid_time);
  for (double v : f.values) w.f64(v);
  return std::move(w.bytes());
}

inline GridField decode_wgf(std::span<const std::uint8_t> bytes, const std::string& what = "WGF") {
  detail::ByteReader<FormatError> r(bytes, what);
  r.need(kWgfHeaderBytes);
  if (!std::equal(kWgfMagic.begin(), kWgfMagic.end(), bytes.begin())) r.fail("bad magic", 0);
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kWgfVersion) r.fail("unsupported version " + std::to_string(version), 4);
  GridField f;
  const std::uint8_t var = r.u8();
  if (var > static_cast<std::uint8_t>(VarId::Depth)) r.fail("unknown variable id " + std::to_string(var), 8);
  f.var = static_cast<VarId>(var);
  const std::uint8_t units = r.u8();
  if (units > static_cast<std::uint8_t>(Units::MetersPerSecond)) r.fail("unknown units code " + std::to_string(units), 9);
  f.units = static_cast<Units>(units);
  if (r.u16() != 0) r.fail("reserved field is not zero", 10);
  f.geom.lat_count = r.u32();
  f.geom.lon_count = r.u32();
  f.geom.lat0 = r.f64();
  f.geom.dlat = r.f64();
  f.geom.lon0 = r.f64();
  f.geom.dlon = r.f64();
  f.valid_time = r.i64();
  const std::uint64_t expected = static_cast<std::uint64_t>(f.geom.lat_count) * f.geom.lon_count * 8;
  if (r.remaining() != expected) {
    r.fail("payload has " + std::to_string(r.remaining()) + " bytes but header declares " +
               std::to_string(f.geom.lat_count) + "x" + std::to_string(f.geom.lon_count) + " values (" +
               std::to_string(expected) + " bytes)",
           kWgfHeaderBytes);
  }
  f.values.resize(f.geom.lat_count * f.geom.lon_count);
  for (auto& v : f.values) v = r.f64();
  try {
    f.geom.validate();
  } catch (const ShapeError& e) {
    r.fail(e.what(), 16);
  }
  return f;
}

inline void write_wgf(const GridField& f, const std::filesystem::path& path) { write_file_bytes(path, encode_wgf(f)); }

inline GridField read_wgf(const std::filesystem::path& path) { return decode_wgf(read_file_bytes(path), path.string()); }

// ---------------------------------------------------------------------------
// Time stamps: seconds since the Unix epoch, ISO-8601 UTC text.

namespace detail {

// Howard Hinnant's civil-calendar conversions.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

}  // namespace detail

inline constexpr std::int64_t kStaticTime = -1;

inline std::string format_iso_time(std::int64_t t) {
  if (t == kStaticTime) return "static";
  const std::int64_t days = (t >= 0 ? t : t - 86399) / 86400;
  const std::int64_t secs = t - days * 86400;
  std::int64_t y;
  unsigned m, d;
  detail::civil_from_days(days, y, m, d);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m, d,
                static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

inline std::int64_t parse_iso_time(const std::string& s) {
  if (s == "static") return kStaticTime;
  long long y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char z = 0;
  if (std::sscanf(s.c_str(), "%lld-%u-%uT%u:%u:%u%c", &y, &mo, &d, &h, &mi, &se, &z) != 7 || z != 'Z' || mo < 1 ||
      mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60) {
    throw DataError("malformed ISO-8601 time '" + s + "'");
  }
  return detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

/// Compact stamp for file names, e.g. 20110101T00.
inline std::string time_tag(std::int64_t t) {
  const std::string iso = format_iso_time(t);
  if (t == kStaticTime) return iso;
  return iso.substr(0, 4) + iso.substr(5, 2) + iso.substr(8, 2) + "T" + iso.substr(11, 2) + iso.substr(14, 2);
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestRecord {
  std::int64_t time = kStaticTime;
  std::string variable;
  std::string path;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

inline std::vector<ManifestRecord> parse_manifest(const std::string& text, const std::string& what = "manifest") {
  std::vector<ManifestRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string t, var, path, extra;
    if (!(ls >> t >> var >> path) || (ls >> extra)) {
      throw FormatError(what + ":" + std::to_string(lineno) + ": expected '<iso-time> <variable> <path>'");
    }
    try {
      out.push_back({parse_iso_time(t), var, path});
    } catch (const DataError& e) {
      throw FormatError(what + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::string render_manifest(std::span<const ManifestRecord> records) {
  std::string out;
  for (const auto& r : records) out += format_iso_time(r.time) + " " + r.variable + " " + r.path + "\n";
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text_file(path), path.string());
}

inline void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records) {
  write_text_file(path, render_manifest(records));
}

}  // namespace wavecast
