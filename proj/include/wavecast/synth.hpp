#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "wavecast/dataset.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/grid.hpp"
#include "wavecast/rng.hpp"
#include "wavecast/wgf.hpp"

namespace wavecast {

/// Synthetic wind-wave world. Waves relax toward a wind-determined equilibrium
/// (SWH = alpha*s^2) and are carried downwind by semi-Lagrangian advection.
struct SynthConfig {
  std::size_t lat_count = 32;
  std::size_t lon_count = 64;
  std::size_t n_steps = 2000;
  double dt_hours = 24.0;
  std::uint64_t seed = 7;
  double alpha = 0.025;          // m per (m/s)^2
  double lambda = 0.3;           // relaxation per step
  double beta = 0.55;            // s per (m/s)
  double advection = 0.3;        // fraction of wind displacement applied to SWH
  std::size_t n_storms = 4;
  double storm_peak = 22.0;      // m/s at the vortex centre
  double storm_radius = 10.0;    // degrees, e-folding scale of the speed profile
  double background_speed = 8.0; // m/s, zonal jets
  double land_fraction = 0.25;
  double wind_noise_std = 3.0;   // m/s, degraded forcing; 0 disables
  std::size_t history = 2;
  std::size_t horizon = 7;
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  double test_ratio = 0.1;
  std::int64_t start_time = 1293840000;  // 2011-01-01T00:00:00Z

  void validate() const {
    if (lat_count < 2 || lon_count < 2) throw ConfigError("grid needs at least 2x2 cells");
    if (!(dt_hours > 0.0)) throw ConfigError("dt_hours must be positive");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(advection >= 0.0 && advection <= 1.0)) throw ConfigError("advection must lie in [0, 1]");
    if (!(storm_peak >= 0.0) || !(storm_radius > 0.0) || !(background_speed >= 0.0)) {
      throw ConfigError("storm_peak, background_speed must be >= 0 and storm_radius > 0");
    }
    if (!(land_fraction >= 0.0)) throw ConfigError("land_fraction must be >= 0");
    if (land_fraction >= 1.0) throw ConfigError("land_fraction must be < 1");
    if (!(wind_noise_std >= 0.0)) throw ConfigError("wind_noise_std must be >= 0");
    if (history < 1 || horizon < 1) throw ConfigError("history and horizon must be >= 1");
    if (!(train_ratio > 0.0) || !(val_ratio >= 0.0) || !(test_ratio >= 0.0) ||
        std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
      throw ConfigError("split ratios must be non-negative with train > 0 and sum to 1");
    }
  }

  GridGeometry geometry() const { return GridGeometry::global(lat_count, lon_count); }
  std::int64_t dt_seconds() const { return static_cast<std::int64_t>(std::llround(dt_hours * 3600.0)); }
  std::int64_t time_of(std::size_t step) const { return start_time + static_cast<std::int64_t>(step) * dt_seconds(); }
};

/// A translating vortex. Centres sit on cell centres and move whole cells per step.
struct Storm {
  std::int64_t row = 0;
  std::int64_t col = 0;
  std::int64_t drow = 0;
  std::int64_t dcol = 0;
  double radius = 10.0;
  std::size_t age = 0;
  std::size_t life = 1;
  std::uint64_t cycle = 0;
  friend bool operator==(const Storm&, const Storm&) = default;
};

struct WorldState {
  GridField u10;
  GridField v10;
  WaveState wave;
  GridField depth;
  LandMask mask;
  std::vector<Storm> storms;
  std::size_t step = 0;
};

namespace detail {

inline constexpr double kMetersPerDegree = 111195.0;
inline constexpr double kDeg = std::numbers::pi / 180.0;

inline Storm spawn_storm(const SynthConfig& cfg, std::size_t index, std::uint64_t cycle) {
  CounterRng rng = CounterRng(cfg.seed).substream(0x53544f524dULL).substream(index).substream(cycle);
  const auto rows = static_cast<std::int64_t>(cfg.lat_count);
  const std::int64_t margin = std::max<std::int64_t>(1, rows / 8);
  const std::int64_t lo = margin, hi = rows - 1 - margin;
  Storm s;
  s.cycle = cycle;
  s.life = 8 + static_cast<std::size_t>(rng.below(9));
  s.row = lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(std::max<std::int64_t>(1, hi - lo + 1))));
  s.col = static_cast<std::int64_t>(rng.below(cfg.lon_count));
  const std::int64_t dcols[] = {-2, -1, 1, 2};
  s.dcol = dcols[rng.below(4)];
  s.drow = static_cast<std::int64_t>(rng.below(3)) - 1;
  const auto end = s.row + s.drow * static_cast<std::int64_t>(s.life);
  if (end < lo || end > hi) s.drow = 0;
  s.radius = cfg.storm_radius * rng.uniform(0.7, 1.3);
  return s;
}

inline std::int64_t wrap(std::int64_t j, std::int64_t n) { return ((j % n) + n) % n; }

}  // namespace detail

/// Smooth zonal jets (easterly trades, mid-latitude westerlies) with a slow
/// eastward-travelling meridional ripple.
inline std::pair<GridField, GridField> background_wind(const SynthConfig& cfg, const GridGeometry& g,
                                                       std::size_t step) {
  GridField u(VarId::U10, Units::MetersPerSecond, g, cfg.time_of(step));
  GridField v(VarId::V10, Units::MetersPerSecond, g, cfg.time_of(step));
  const double b = cfg.background_speed;
  if (b == 0.0) return {std::move(u), std::move(v)};
  const double k = static_cast<double>(step);
  const double pulse = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * k / 37.0);
  for (std::size_t i = 0; i < g.lat_count; ++i) {
    const double phi = g.lat(i) * detail::kDeg;
    for (std::size_t j = 0; j < g.lon_count; ++j) {
      const double lam = g.lon(j) * detail::kDeg;
      u.at(i, j) = -b * pulse * std::cos(3.0 * phi);
      v.at(i, j) = 0.35 * b * std::cos(phi) * std::sin(2.0 * lam - 2.0 * std::numbers::pi * k / 23.0);
    }
  }
  return {std::move(u), std::move(v)};
}

/// Background plus Gaussian-profile vortices. Rotation is counter-clockwise in
/// the northern hemisphere; at the centre the wind points along the track.
inline std::pair<GridField, GridField> wind_field(const SynthConfig& cfg, const GridGeometry& g,
                                                  std::span<const Storm> storms, std::size_t step) {
  auto [u, v] = background_wind(cfg, g, step);
  const auto cols = static_cast<std::int64_t>(g.lon_count);
  for (const Storm& s : storms) {
    const double clat = g.lat(static_cast<std::size_t>(s.row));
    const double hemi = clat >= 0.0 ? 1.0 : -1.0;
    const double coslat = std::cos(clat * detail::kDeg);
    double hx = static_cast<double>(s.dcol) * g.dlon * coslat, hy = static_cast<double>(s.drow) * g.dlat;
    const double hn = std::hypot(hx, hy);
    hx /= hn;
    hy /= hn;
    for (std::size_t i = 0; i < g.lat_count; ++i) {
      const double dy = (static_cast<double>(i) - static_cast<double>(s.row)) * g.dlat;
      for (std::size_t j = 0; j < g.lon_count; ++j) {
        std::int64_t dj = detail::wrap(static_cast<std::int64_t>(j) - s.col, cols);
        if (dj > cols / 2) dj -= cols;
        const double dx = static_cast<double>(dj) * g.dlon * coslat;
        const double r2 = dx * dx + dy * dy;
        const double speed = cfg.storm_peak * std::exp(-r2 / (2.0 * s.radius * s.radius));
        if (r2 == 0.0) {
          u.at(i, j) += speed * hx;
          v.at(i, j) += speed * hy;
        } else {
          const double r = std::sqrt(r2);
          u.at(i, j) += speed * hemi * (-dy / r);
          v.at(i, j) += speed * hemi * (dx / r);
        }
      }
    }
  }
  return {std::move(u), std::move(v)};
}

/// Moves every storm one step; expired storms respawn from their next seed-derived cycle.
inline void advance_storms(std::vector<Storm>& storms, const SynthConfig& cfg) {
  const auto cols = static_cast<std::int64_t>(cfg.lon_count);
  for (std::size_t n = 0; n < storms.size(); ++n) {
    Storm& s = storms[n];
    if (++s.age >= s.life) {
      s = detail::spawn_storm(cfg, n, s.cycle + 1);
      continue;
    }
    s.row += s.drow;
    s.col = detail::wrap(s.col + s.dcol, cols);
  }
}

/// Toward-direction of the wind, degrees clockwise from north.
inline double wind_direction_deg(double u, double v) {
  double d = std::atan2(u, v) / detail::kDeg;
  if (d < 0.0) d += 360.0;
  if (d >= 360.0) d -= 360.0;
  return d;
}

/// One step of the wave dynamics forced by the new wind. Land stays NaN.
inline WaveState step_wave(const WaveState& wave, const GridField& u, const GridField& v, const LandMask& mask,
                           const SynthConfig& cfg) {
  const GridGeometry& g = mask.geometry();
  const std::size_t n = g.cells();
  const std::int64_t t = u.valid_time;
  std::vector<double> relaxed(n, kMissing);
  for (std::size_t c = 0; c < n; ++c) {
    if (!mask.ocean(c)) continue;
    const double s2 = u.values[c] * u.values[c] + v.values[c] * v.values[c];
    relaxed[c] = (1.0 - cfg.lambda) * wave.swh.values[c] + cfg.lambda * (cfg.alpha * s2);
  }

  WaveState next{GridField(VarId::SWH, Units::Meters, g, t, kMissing), GridField(VarId::MWP, Units::Seconds, g, t, kMissing),
                 GridField(VarId::Generic, Units::None, g, t, kMissing),
                 GridField(VarId::Generic, Units::None, g, t, kMissing)};
  const double dt = cfg.dt_hours * 3600.0;
  const auto rows = static_cast<double>(g.lat_count);
  for (std::size_t i = 0; i < g.lat_count; ++i) {
    const double coslat = std::max(std::cos(g.lat(i) * detail::kDeg), 0.1);
    for (std::size_t j = 0; j < g.lon_count; ++j) {
      const std::size_t c = i * g.lon_count + j;
      if (!mask.ocean(c)) continue;
      const double uu = u.values[c], vv = v.values[c];
      const double s = std::hypot(uu, vv);
      next.mwp.values[c] = std::max(0.5, cfg.beta * s);
      const double dir = wind_direction_deg(uu, vv) * detail::kDeg;
      next.mwd_sin.values[c] = std::sin(dir);
      next.mwd_cos.values[c] = std::cos(dir);

      if (cfg.advection == 0.0) {
        next.swh.values[c] = relaxed[c];
        continue;
      }
      const double shift_lat = cfg.advection * vv * dt / detail::kMetersPerDegree / g.dlat;
      const double shift_lon = cfg.advection * uu * dt / (detail::kMetersPerDegree * coslat) / g.dlon;
      const double fi = std::clamp(static_cast<double>(i) - shift_lat, 0.0, rows - 1.0);
      double fj = std::fmod(static_cast<double>(j) - shift_lon, static_cast<double>(g.lon_count));
      if (fj < 0.0) fj += static_cast<double>(g.lon_count);
      const auto i0 = static_cast<std::size_t>(std::floor(fi));
      const std::size_t i1 = std::min(i0 + 1, g.lat_count - 1);
      const auto j0 = static_cast<std::size_t>(std::floor(fj)) % g.lon_count;
      const std::size_t j1 = (j0 + 1) % g.lon_count;
      const double a = fi - static_cast<double>(i0), b = fj - std::floor(fj);
      const std::size_t c00 = i0 * g.lon_count + j0, c01 = i0 * g.lon_count + j1;
      const std::size_t c10 = i1 * g.lon_count + j0, c11 = i1 * g.lon_count + j1;
      if (!mask.ocean(c00) || !mask.ocean(c01) || !mask.ocean(c10) || !mask.ocean(c11)) {
        next.swh.values[c] = relaxed[c];
        continue;
      }
      next.swh.values[c] = (1 - a) * ((1 - b) * relaxed[c00] + b * relaxed[c01]) +
                           a * ((1 - b) * relaxed[c10] + b * relaxed[c11]);
    }
  }
  return next;
}

/// Land as smooth Gaussian blobs, thresholded so that round(land_fraction * cells)
/// cells have elevation >= 0. Ocean depth is negative.
inline GridField make_depth(const SynthConfig& cfg) {
  const GridGeometry g = cfg.geometry();
  const std::size_t n = g.cells();
  CounterRng rng = CounterRng(cfg.seed).substream(0x4c414e44ULL);
  const std::size_t blobs = 3 + static_cast<std::size_t>(rng.below(4));
  std::vector<double> elev(n, 0.0);
  const auto cols = static_cast<std::int64_t>(g.lon_count);
  for (std::size_t b = 0; b < blobs; ++b) {
    const double ci = rng.uniform(0.0, static_cast<double>(g.lat_count));
    const auto cj = static_cast<std::int64_t>(rng.below(g.lon_count));
    const double sigma = rng.uniform(0.08, 0.18) * static_cast<double>(g.lon_count);
    const double amp = rng.uniform(0.6, 1.0);
    for (std::size_t i = 0; i < g.lat_count; ++i) {
      for (std::size_t j = 0; j < g.lon_count; ++j) {
        std::int64_t dj = detail::wrap(static_cast<std::int64_t>(j) - cj, cols);
        if (dj > cols / 2) dj -= cols;
        const double dy = (static_cast<double>(i) - ci) * g.dlat / g.dlon;
        const double r2 = dy * dy + static_cast<double>(dj * dj);
        elev[i * g.lon_count + j] += amp * std::exp(-r2 / (2.0 * sigma * sigma));
      }
    }
  }
  // Small-scale roughness keeps the threshold free of ties.
  for (auto& e : elev) e += 1e-3 * rng.uniform();

  const auto land = static_cast<std::size_t>(std::llround(cfg.land_fraction * static_cast<double>(n)));
  if (land >= n) throw DomainError("land_fraction leaves no ocean cells on a " + g.describe() + " grid");
  std::vector<double> sorted = elev;
  std::sort(sorted.begin(), sorted.end());
  // Cells strictly above the threshold become land.
  const double threshold = land == 0 ? sorted.back() + 1.0 : 0.5 * (sorted[n - land - 1] + sorted[n - land]);
  const double top = sorted.back();
  GridField depth(VarId::Depth, Units::Meters, g, kStaticTime);
  for (std::size_t c = 0; c < n; ++c) {
    const double e = elev[c];
    depth.values[c] = e > threshold ? 100.0 + 2000.0 * (e - threshold) / std::max(top - threshold, 1e-9)
                                    : -200.0 - 4000.0 * (threshold - e) / std::max(threshold - sorted.front(), 1e-9);
  }
  return depth;
}

inline void apply_land(WaveState& w, const LandMask& mask) {
  for (std::size_t c = 0; c < mask.cells(); ++c) {
    if (mask.ocean(c)) continue;
    w.swh.values[c] = w.mwp.values[c] = w.mwd_sin.values[c] = w.mwd_cos.values[c] = kMissing;
  }
}

/// Initial world: storms at random points of their first cycle and waves at the
/// equilibrium of the initial wind.
inline WorldState gen_world(const SynthConfig& cfg) {
  cfg.validate();
  WorldState w;
  w.depth = make_depth(cfg);
  w.mask = derive_mask(w.depth);
  for (std::size_t n = 0; n < cfg.n_storms; ++n) {
    Storm s = detail::spawn_storm(cfg, n, 0);
    CounterRng rng = CounterRng(cfg.seed).substream(0x414745ULL).substream(n);
    const auto skip = rng.below(s.life);
    w.storms.push_back(s);
    for (std::uint64_t k = 0; k < skip; ++k) {
      Storm& t = w.storms.back();
      ++t.age;
      t.row += t.drow;
      t.col = detail::wrap(t.col + t.dcol, static_cast<std::int64_t>(cfg.lon_count));
    }
  }
  const GridGeometry g = cfg.geometry();
  std::tie(w.u10, w.v10) = wind_field(cfg, g, w.storms, 0);
  const std::int64_t t0 = cfg.time_of(0);
  WaveState eq{GridField(VarId::SWH, Units::Meters, g, t0), GridField(VarId::MWP, Units::Seconds, g, t0),
               GridField(VarId::Generic, Units::None, g, t0), GridField(VarId::Generic, Units::None, g, t0)};
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const double uu = w.u10.values[c], vv = w.v10.values[c];
    const double s = std::hypot(uu, vv);
    eq.swh.values[c] = cfg.alpha * s * s;
    eq.mwp.values[c] = std::max(0.5, cfg.beta * s);
    const double dir = wind_direction_deg(uu, vv) * detail::kDeg;
    eq.mwd_sin.values[c] = std::sin(dir);
    eq.mwd_cos.values[c] = std::cos(dir);
  }
  apply_land(eq, w.mask);
  w.wave = std::move(eq);
  return w;
}

/// Advances storms and returns the wind at step + 1.
inline std::pair<GridField, GridField> step_wind(WorldState& w, const SynthConfig& cfg) {
  advance_storms(w.storms, cfg);
  return wind_field(cfg, w.mask.geometry(), w.storms, w.step + 1);
}

inline void step_world(WorldState& w, const SynthConfig& cfg) {
  auto [u, v] = step_wind(w, cfg);
  w.wave = step_wave(w.wave, u, v, w.mask, cfg);
  w.u10 = std::move(u);
  w.v10 = std::move(v);
  ++w.step;
}

// ---------------------------------------------------------------------------
// Dataset generation

struct SplitCounts {
  std::size_t usable = 0;
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Chronological split of the usable initialisation steps.
inline SplitCounts split_counts(const SynthConfig& cfg) {
  if (cfg.n_steps < cfg.history + cfg.horizon) {
    throw ConfigError("n_steps=" + std::to_string(cfg.n_steps) + " is too small for one sample (history " +
                      std::to_string(cfg.history) + " + horizon " + std::to_string(cfg.horizon) + ")");
  }
  SplitCounts s;
  s.usable = cfg.n_steps - cfg.history - cfg.horizon + 1;
  const auto usable = static_cast<double>(s.usable);
  s.train = static_cast<std::size_t>(std::llround(cfg.train_ratio * usable));
  s.val = static_cast<std::size_t>(std::llround(cfg.val_ratio * usable));
  s.train = std::min(s.train, s.usable);
  s.val = std::min(s.val, s.usable - s.train);
  s.test = s.usable - s.train - s.val;
  if (s.train == 0) throw ConfigError("training split is empty");
  return s;
}

namespace detail {

struct Welford {
  double n = 0, mean = 0, m2 = 0;
  void add(double v) {
    n += 1.0;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  Moments moments() const { return Moments{mean, n > 0 ? std::sqrt(m2 / n) : 0.0}; }
};

}  // namespace detail

struct DatasetSummary {
  SplitCounts counts;
  NormStats stats;
  std::size_t files_written = 0;
};

/// Runs the world for n_steps and writes the dataset layout under `out`.
/// The output is a pure function of the configuration.
inline DatasetSummary gen_dataset(const SynthConfig& cfg, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  cfg.validate();
  const SplitCounts counts = split_counts(cfg);
  WorldState world = gen_world(cfg);
  const GridGeometry g = cfg.geometry();
  const std::size_t n = g.cells();
  fs::create_directories(out);

  // Times referenced by training samples: history of the first init through the horizon of the last.
  const std::size_t first_init = cfg.history - 1;
  const std::size_t train_last_step = first_init + counts.train - 1 + cfg.horizon;

  std::vector<ManifestRecord> all, degraded;
  DatasetSummary summary;
  summary.counts = counts;
  detail::Welford ws, wp, wu, wv;
  std::vector<double> clim_swh(n, 0.0), clim_mwp(n, 0.0);
  std::size_t clim_count = 0;

  const fs::path depth_rel = layout::kDepthFile;
  write_wgf(world.depth, out / depth_rel);
  all.push_back({kStaticTime, "DEPTH", depth_rel.generic_string()});

  auto emit = [&](fs::path rel, const GridField& f, std::vector<ManifestRecord>& list) {
    write_wgf(f, out / rel);
    list.push_back({f.valid_time, var_name(f.var), rel.generic_string()});
    ++summary.files_written;
  };

  for (std::size_t k = 0; k < cfg.n_steps; ++k) {
    if (k > 0) step_world(world, cfg);
    const std::int64_t t = cfg.time_of(k);
    const std::string tag = time_tag(t);
    GridField mwd = wave_direction(world.wave);
    mwd.var = VarId::MWD;
    mwd.units = Units::Degrees;
    emit(fs::path(layout::kFieldsDir) / (tag + "_swh.wgf"), world.wave.swh, all);
    emit(fs::path(layout::kFieldsDir) / (tag + "_mwp.wgf"), world.wave.mwp, all);
    emit(fs::path(layout::kFieldsDir) / (tag + "_mwd.wgf"), mwd, all);
    emit(fs::path(layout::kFieldsDir) / (tag + "_u10.wgf"), world.u10, all);
    emit(fs::path(layout::kFieldsDir) / (tag + "_v10.wgf"), world.v10, all);

    if (k <= train_last_step) {
      for (std::size_t c = 0; c < n; ++c) {
        wu.add(world.u10.values[c]);
        wv.add(world.v10.values[c]);
        if (!world.mask.ocean(c)) continue;
        ws.add(world.wave.swh.values[c]);
        wp.add(world.wave.mwp.values[c]);
        clim_swh[c] += world.wave.swh.values[c];
        clim_mwp[c] += world.wave.mwp.values[c];
      }
      ++clim_count;
    }

    if (cfg.wind_noise_std > 0.0) {
      CounterRng rng = CounterRng(cfg.seed).substream(0x4e4f495345ULL).substream(k);
      GridField du = world.u10, dv = world.v10;
      for (std::size_t c = 0; c < n; ++c) {
        du.values[c] += cfg.wind_noise_std * rng.normal();
        dv.values[c] += cfg.wind_noise_std * rng.normal();
      }
      emit(fs::path(tag + "_u10.wgf"), du, degraded);
      emit(fs::path(tag + "_v10.wgf"), dv, degraded);
    }
  }

  // Degraded winds live in their own directory with paths relative to it.
  if (cfg.wind_noise_std > 0.0) {
    const fs::path dir = out / layout::kDegradedDir;
    for (const auto& r : degraded) {
      fs::create_directories(dir);
      fs::rename(out / r.path, dir / r.path);
    }
    write_manifest(dir / layout::kWindsManifest, degraded);
  }

  summary.stats = NormStats{ws.moments(), wp.moments(), wu.moments(), wv.moments()};
  summary.stats.validate();
  write_text_file(out / layout::kNormStats, render_norm_stats(summary.stats));

  GridField cs(VarId::SWH, Units::Meters, g, kStaticTime, kMissing), cp(VarId::MWP, Units::Seconds, g, kStaticTime, kMissing);
  for (std::size_t c = 0; c < n; ++c) {
    if (!world.mask.ocean(c)) continue;
    cs.values[c] = clim_swh[c] / static_cast<double>(clim_count);
    cp.values[c] = clim_mwp[c] / static_cast<double>(clim_count);
  }
  write_wgf(cs, out / layout::kClimSwhFile);
  write_wgf(cp, out / layout::kClimMwpFile);
  all.push_back({kStaticTime, "CLIM_SWH", layout::kClimSwhFile});
  all.push_back({kStaticTime, "CLIM_MWP", layout::kClimMwpFile});
  write_manifest(out / layout::kDatasetManifest, all);

  // Split manifests and sample lists.
  const std::size_t bounds[4] = {0, counts.train, counts.train + counts.val, counts.usable};
  const char* names[3] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s) {
    std::string samples;
    std::vector<ManifestRecord> records;
    if (bounds[s + 1] > bounds[s]) {
      const std::size_t lo = first_init + bounds[s] - (cfg.history - 1);
      const std::size_t hi = first_init + bounds[s + 1] - 1 + cfg.horizon;
      for (const auto& r : all) {
        if (r.time == kStaticTime) continue;
        const auto step = static_cast<std::size_t>((r.time - cfg.start_time) / cfg.dt_seconds());
        if (step >= lo && step <= hi) records.push_back(r);
      }
      for (std::size_t i = bounds[s]; i < bounds[s + 1]; ++i) samples += format_iso_time(cfg.time_of(first_init + i)) + "\n";
    }
    write_manifest(out / (std::string(names[s]) + layout::kManifestSuffix), records);
    write_text_file(out / (std::string(names[s]) + layout::kSamplesSuffix), samples);
  }

  DatasetInfo info;
  info.lat_count = cfg.lat_count;
  info.lon_count = cfg.lon_count;
  info.dt_seconds = cfg.dt_seconds();
  info.history = cfg.history;
  info.horizon = cfg.horizon;
  info.n_steps = cfg.n_steps;
  info.seed = cfg.seed;
  write_text_file(out / layout::kInfoFile, render_dataset_info(info));
  return summary;
}

}  // namespace wavecast
