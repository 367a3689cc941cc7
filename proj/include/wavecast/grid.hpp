#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wavecast/errors.hpp"
#include "wavecast/tensor.hpp"

namespace wavecast {

enum class VarId : std::uint8_t { Generic = 0, SWH = 1, MWP = 2, MWD = 3, U10 = 4, V10 = 5, Depth = 6 };

enum class Units : std::uint8_t { None = 0, Meters = 1, Seconds = 2, Degrees = 3, MetersPerSecond = 4 };

inline const char* var_name(VarId v) {
  switch (v) {
    case VarId::Generic: return "GENERIC";
    case VarId::SWH: return "SWH";
    case VarId::MWP: return "MWP";
    case VarId::MWD: return "MWD";
    case VarId::U10: return "U10";
    case VarId::V10: return "V10";
    case VarId::Depth: return "DEPTH";
  }
  return "?";
}

inline const char* units_name(Units u) {
  switch (u) {
    case Units::None: return "1";
    case Units::Meters: return "m";
    case Units::Seconds: return "s";
    case Units::Degrees: return "deg";
    case Units::MetersPerSecond: return "m/s";
  }
  return "?";
}

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Regular lat/lon grid in degrees. Latitude is the outer (row) index.
struct GridGeometry {
  std::size_t lat_count = 0;
  std::size_t lon_count = 0;
  double lat0 = 0.0;
  double dlat = 0.0;
  double lon0 = 0.0;
  double dlon = 0.0;

  std::size_t cells() const { return lat_count * lon_count; }
  double lat(std::size_t i) const { return lat0 + dlat * static_cast<double>(i); }
  double lon(std::size_t j) const { return lon0 + dlon * static_cast<double>(j); }

  /// Positive extents and a longitude axis that closes on itself.
  void validate() const {
    if (lat_count == 0 || lon_count == 0) throw ShapeError("grid extents must be positive: " + describe());
    if (std::abs(static_cast<double>(lon_count) * dlon - 360.0) > 1e-9) {
      throw ShapeError("grid is not periodic in longitude (lon_count*dlon != 360): " + describe());
    }
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << lat_count << "x" << lon_count << " lat0=" << lat0 << " dlat=" << dlat << " lon0=" << lon0
       << " dlon=" << dlon;
    return os.str();
  }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

  /// Synthetic global grid: cell-centred latitudes over (-80, 80), longitudes from 0.
  static GridGeometry global(std::size_t lat_count, std::size_t lon_count) {
    GridGeometry g;
    g.lat_count = lat_count;
    g.lon_count = lon_count;
    g.dlat = 160.0 / static_cast<double>(lat_count);
    g.lat0 = -80.0 + 0.5 * g.dlat;
    g.dlon = 360.0 / static_cast<double>(lon_count);
    g.lon0 = 0.0;
    return g;
  }
};

/// A masked 2-D field. Wave variables carry NaN over land.
struct GridField {
  VarId var = VarId::Generic;
  Units units = Units::None;
  GridGeometry geom;
  std::int64_t valid_time = -1;
  std::vector<double> values;

  GridField() = default;
  GridField(VarId v, Units u, GridGeometry g, std::int64_t time = -1, double fill = 0.0)
      : var(v), units(u), geom(g), valid_time(time), values(g.cells(), fill) {}

  double& at(std::size_t i, std::size_t j) { return values[i * geom.lon_count + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * geom.lon_count + j]; }

  void validate() const {
    geom.validate();
    if (values.size() != geom.cells()) {
      throw ShapeError("field holds " + std::to_string(values.size()) + " values for grid " + geom.describe());
    }
  }
};

inline void require_same_geometry(const GridGeometry& a, const GridGeometry& b, const std::string& what) {
  if (!(a == b)) throw ContractError(what + ": grid mismatch [" + a.describe() + "] vs [" + b.describe() + "]");
}

/// Ocean/land classification; true marks ocean.
class LandMask {
 public:
  LandMask() = default;
  LandMask(GridGeometry geom, std::vector<std::uint8_t> ocean) : geom_(geom), ocean_(std::move(ocean)) {
    if (ocean_.size() != geom_.cells()) throw ShapeError("mask size does not match grid " + geom_.describe());
    for (auto o : ocean_) ocean_count_ += o ? 1 : 0;
  }

  static LandMask all_ocean(GridGeometry geom) { return LandMask(geom, std::vector<std::uint8_t>(geom.cells(), 1)); }

  const GridGeometry& geometry() const { return geom_; }
  bool ocean(std::size_t cell) const { return ocean_[cell] != 0; }
  bool ocean(std::size_t i, std::size_t j) const { return ocean_[i * geom_.lon_count + j] != 0; }
  std::size_t ocean_count() const { return ocean_count_; }
  std::size_t cells() const { return ocean_.size(); }
  std::span<const std::uint8_t> flags() const { return ocean_; }

  friend bool operator==(const LandMask& a, const LandMask& b) { return a.geom_ == b.geom_ && a.ocean_ == b.ocean_; }

 private:
  GridGeometry geom_;
  std::vector<std::uint8_t> ocean_;
  std::size_t ocean_count_ = 0;
};

/// Ocean where elevation < 0. Elevation exactly 0 (coastline) counts as land.
inline LandMask derive_mask(const GridField& depth) {
  if (depth.var != VarId::Depth) throw ContractError(std::string("derive_mask expects DEPTH, got ") + var_name(depth.var));
  depth.validate();
  std::vector<std::uint8_t> ocean(depth.values.size());
  for (std::size_t c = 0; c < ocean.size(); ++c) ocean[c] = depth.values[c] < 0.0 ? 1 : 0;
  LandMask mask(depth.geom, std::move(ocean));
  if (mask.ocean_count() == 0) throw DomainError("depth field has no ocean cells");
  return mask;
}

/// SWH (m), MWP (s) and mean direction as its sine/cosine.
struct WaveState {
  GridField swh;
  GridField mwp;
  GridField mwd_sin;
  GridField mwd_cos;

  const GridGeometry& geometry() const { return swh.geom; }
  std::int64_t valid_time() const { return swh.valid_time; }
};

// ---------------------------------------------------------------------------
// Direction encoding. Degrees clockwise from north, so 0 -> (sin 0, cos 1) and
// 90 -> (1, 0).

inline constexpr double kDirectionMinMagnitude = 1e-6;

inline std::pair<GridField, GridField> encode_direction(const GridField& mwd_deg) {
  GridField s(VarId::Generic, Units::None, mwd_deg.geom, mwd_deg.valid_time);
  GridField c = s;
  for (std::size_t i = 0; i < mwd_deg.values.size(); ++i) {
    const double theta = mwd_deg.values[i];
    if (std::isnan(theta)) {
      s.values[i] = c.values[i] = kMissing;
      continue;
    }
    const double rad = theta * std::numbers::pi / 180.0;
    s.values[i] = std::sin(rad);
    c.values[i] = std::cos(rad);
  }
  return {std::move(s), std::move(c)};
}

inline double decode_direction(double s, double c) {
  const double r = std::hypot(s, c);
  if (!(r >= kDirectionMinMagnitude)) return kMissing;
  double deg = std::atan2(s / r, c / r) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

/// Degrees in [0, 360); NaN where the (sin, cos) pair is missing or shorter than 1e-6.
inline GridField decode_direction(const GridField& s, const GridField& c) {
  require_same_geometry(s.geom, c.geom, "decode_direction");
  GridField out(VarId::MWD, Units::Degrees, s.geom, s.valid_time);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = decode_direction(s.values[i], c.values[i]);
  return out;
}

inline GridField wave_direction(const WaveState& w) { return decode_direction(w.mwd_sin, w.mwd_cos); }

// ---------------------------------------------------------------------------
// Normalization

struct Moments {
  double mean = 0.0;
  double std = 1.0;
  friend bool operator==(const Moments&, const Moments&) = default;
};

/// Per-variable z-score statistics from the training split. Direction channels are not scaled.
struct NormStats {
  Moments swh;
  Moments mwp;
  Moments u10;
  Moments v10;

  void validate() const {
    const std::pair<const char*, Moments> all[] = {{"SWH", swh}, {"MWP", mwp}, {"U10", u10}, {"V10", v10}};
    for (const auto& [name, m] : all) {
      if (!(m.std > 0.0) || !std::isfinite(m.mean)) {
        throw StatsError(std::string("non-positive standard deviation for ") + name);
      }
    }
  }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Mean and population standard deviation over ocean cells of a set of fields.
inline Moments ocean_moments(std::span<const GridField* const> fields, const LandMask& mask) {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  for (const GridField* f : fields) {
    for (std::size_t c = 0; c < mask.cells(); ++c) {
      if (!mask.ocean(c)) continue;
      const double v = f->values[c];
      n += 1.0;
      const double delta = v - mean;
      mean += delta / n;
      m2 += delta * (v - mean);
    }
  }
  if (n == 0.0) throw StatsError("no ocean samples for statistics");
  return Moments{mean, std::sqrt(m2 / n)};
}

/// [4, H, W]: z-scored SWH and MWP, raw sin/cos. Land cells become 0.
inline Tensor normalize(const WaveState& w, const NormStats& stats, const LandMask& mask) {
  stats.validate();
  require_same_geometry(w.geometry(), mask.geometry(), "normalize");
  const std::size_t n = mask.cells();
  const auto& g = mask.geometry();
  Tensor out({4, g.lat_count, g.lon_count});
  for (std::size_t c = 0; c < n; ++c) {
    if (!mask.ocean(c)) continue;
    out[c] = (w.swh.values[c] - stats.swh.mean) / stats.swh.std;
    out[n + c] = (w.mwp.values[c] - stats.mwp.mean) / stats.mwp.std;
    out[2 * n + c] = w.mwd_sin.values[c];
    out[3 * n + c] = w.mwd_cos.values[c];
  }
  return out;
}

/// Inverse of normalize over ocean; land cells become NaN. Direction channels are passed through.
inline WaveState denormalize(std::span<const double> channels, const NormStats& stats, const LandMask& mask,
                             std::int64_t valid_time) {
  stats.validate();
  const auto& g = mask.geometry();
  const std::size_t n = mask.cells();
  if (channels.size() != 4 * n) throw ShapeError("denormalize expects 4 channels of " + g.describe());
  WaveState w{GridField(VarId::SWH, Units::Meters, g, valid_time, kMissing),
              GridField(VarId::MWP, Units::Seconds, g, valid_time, kMissing),
              GridField(VarId::Generic, Units::None, g, valid_time, kMissing),
              GridField(VarId::Generic, Units::None, g, valid_time, kMissing)};
  for (std::size_t c = 0; c < n; ++c) {
    if (!mask.ocean(c)) continue;
    w.swh.values[c] = channels[c] * stats.swh.std + stats.swh.mean;
    w.mwp.values[c] = channels[n + c] * stats.mwp.std + stats.mwp.mean;
    w.mwd_sin.values[c] = channels[2 * n + c];
    w.mwd_cos.values[c] = channels[3 * n + c];
  }
  return w;
}

/// [2, H, W] z-scored wind components. Winds are defined over land as well.
inline Tensor normalize_wind(const GridField& u10, const GridField& v10, const NormStats& stats) {
  stats.validate();
  require_same_geometry(u10.geom, v10.geom, "normalize_wind");
  const std::size_t n = u10.values.size();
  Tensor out({2, u10.geom.lat_count, u10.geom.lon_count});
  for (std::size_t c = 0; c < n; ++c) {
    out[c] = (u10.values[c] - stats.u10.mean) / stats.u10.std;
    out[n + c] = (v10.values[c] - stats.v10.mean) / stats.v10.std;
  }
  return out;
}

inline std::pair<GridField, GridField> denormalize_wind(std::span<const double> channels, const NormStats& stats,
                                                        const GridGeometry& g, std::int64_t valid_time) {
  const std::size_t n = g.cells();
  if (channels.size() != 2 * n) throw ShapeError("denormalize_wind expects 2 channels of " + g.describe());
  GridField u(VarId::U10, Units::MetersPerSecond, g, valid_time), v(VarId::V10, Units::MetersPerSecond, g, valid_time);
  for (std::size_t c = 0; c < n; ++c) {
    u.values[c] = channels[c] * stats.u10.std + stats.u10.mean;
    v.values[c] = channels[n + c] * stats.v10.std + stats.v10.mean;
  }
  return {std::move(u), std::move(v)};
}

}  // namespace wavecast
