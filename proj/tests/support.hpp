#pragma once

// Fixtures and brute-force oracles shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "wavecast/autodiff.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/metrics.hpp"
#include "wavecast/rng.hpp"
#include "wavecast/vit.hpp"

namespace wavecast::testing {

inline Tensor random_tensor(Shape shape, CounterRng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

/// Infinity when the shapes differ.
inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Elevation with a land block in the middle; everything else is ocean of varying depth.
inline Terrain toy_terrain(const GridGeometry& g) {
  GridField depth(VarId::Depth, Units::Meters, g, kStaticTime);
  for (std::size_t i = 0; i < g.lat_count; ++i)
    for (std::size_t j = 0; j < g.lon_count; ++j) {
      const bool land = i >= g.lat_count / 4 && i < g.lat_count / 2 && j >= 2 && j < 6;
      depth.at(i, j) = land ? 50.0 + 10.0 * static_cast<double>(i) : -1000.0 - 100.0 * static_cast<double>(j);
    }
  Terrain t;
  t.mask = derive_mask(depth);
  t.depth = std::move(depth);
  return t;
}

inline ModelInput toy_input(std::size_t b, std::size_t t_in, std::size_t t_force, const GridGeometry& g,
                            const LandMask& mask, std::uint64_t seed) {
  CounterRng rng(seed);
  ModelInput in;
  in.waves = random_tensor({b, t_in, 4, g.lat_count, g.lon_count}, rng);
  in.winds = random_tensor({b, t_force, 2, g.lat_count, g.lon_count}, rng);
  const std::size_t cells = g.cells();
  for (std::size_t s = 0; s < in.waves.size() / cells; ++s)
    for (std::size_t c = 0; c < cells; ++c)
      if (!mask.ocean(c)) in.waves[s * cells + c] = 0.0;
  return in;
}

inline ViTConfig small_vit() {
  ViTConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_enc_blocks = 1;
  c.n_dec_blocks = 1;
  c.mlp_ratio = 2;
  return c;
}

// ---------------------------------------------------------------------------
// Metric instances and oracles, computed from the raw arrays.

struct Instance {
  GridGeometry geom;
  LandMask mask;
  std::vector<WaveState> preds, truths;
};

inline WaveState make_state(const GridGeometry& g, const LandMask& mask, CounterRng& rng, double swh_lo,
                            double swh_hi) {
  WaveState w{GridField(VarId::SWH, Units::Meters, g, 0, kMissing), GridField(VarId::MWP, Units::Seconds, g, 0, kMissing),
              GridField(VarId::Generic, Units::None, g, 0, kMissing), GridField(VarId::Generic, Units::None, g, 0, kMissing)};
  for (std::size_t c = 0; c < g.cells(); ++c) {
    if (!mask.ocean(c)) continue;
    w.swh.values[c] = rng.uniform(swh_lo, swh_hi);
    w.mwp.values[c] = rng.uniform(1.0, 9.0);
    const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w.mwd_sin.values[c] = std::sin(th);
    w.mwd_cos.values[c] = std::cos(th);
  }
  return w;
}

/// 6x6 grid, about 80% ocean, `n` forecast/truth pairs with SWH in [0, 9).
inline Instance random_instance(std::uint64_t seed, std::size_t n = 4) {
  CounterRng rng(seed);
  Instance in;
  in.geom = GridGeometry::global(6, 6);
  std::vector<std::uint8_t> ocean(36);
  for (auto& o : ocean) o = rng.uniform() < 0.8 ? 1 : 0;
  ocean[0] = 1;
  in.mask = LandMask(in.geom, ocean);
  for (std::size_t i = 0; i < n; ++i) {
    in.preds.push_back(make_state(in.geom, in.mask, rng, 0.0, 9.0));
    in.truths.push_back(make_state(in.geom, in.mask, rng, 0.0, 9.0));
  }
  return in;
}

inline double oracle_angle(double s, double c) {
  double d = std::atan2(s, c) * 180.0 / std::numbers::pi;
  return d < 0 ? d + 360.0 : d;
}

// Angle between the two unit vectors, atan2(|cross|, dot): well conditioned near 0 and 180.
inline double oracle_circ(double a, double b) {
  const double ra = a * std::numbers::pi / 180.0, rb = b * std::numbers::pi / 180.0;
  const double dot = std::cos(ra) * std::cos(rb) + std::sin(ra) * std::sin(rb);
  const double cross = std::sin(ra) * std::cos(rb) - std::cos(ra) * std::sin(rb);
  return std::atan2(std::abs(cross), dot) * 180.0 / std::numbers::pi;
}

// err(var, instance, lat, lon) or NaN.
inline double oracle_error(const Instance& in, int var, std::size_t i, std::size_t y, std::size_t x) {
  const std::size_t c = y * in.geom.lon_count + x;
  if (!in.mask.ocean(c)) return kMissing;
  const auto& p = in.preds[i];
  const auto& t = in.truths[i];
  if (var == 0) return p.swh.values[c] - t.swh.values[c];
  if (var == 1) return p.mwp.values[c] - t.mwp.values[c];
  if (t.swh.values[c] < 0.1) return kMissing;
  return oracle_circ(oracle_angle(p.mwd_sin.values[c], p.mwd_cos.values[c]),
                     oracle_angle(t.mwd_sin.values[c], t.mwd_cos.values[c]));
}

/// Per-cell RMSE over instances; NaN where nothing is scorable.
inline std::vector<double> oracle_rmse_map(const Instance& in, int var) {
  std::vector<double> out;
  for (std::size_t y = 0; y < in.geom.lat_count; ++y)
    for (std::size_t x = 0; x < in.geom.lon_count; ++x) {
      double sq = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < in.preds.size(); ++i) {
        const double e = oracle_error(in, var, i, y, x);
        if (std::isnan(e)) continue;
        sq += e * e;
        ++n;
      }
      out.push_back(n ? std::sqrt(sq / n) : kMissing);
    }
  return out;
}

/// Mean |p - t| / t over ocean points whose true SWH reaches `threshold`.
inline double oracle_mre(const Instance& in, int var, double threshold = 1.0) {
  double total = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < in.preds.size(); ++i)
    for (std::size_t c = 0; c < in.geom.cells(); ++c) {
      if (!in.mask.ocean(c) || in.truths[i].swh.values[c] < threshold) continue;
      const double p = var == 0 ? in.preds[i].swh.values[c] : in.preds[i].mwp.values[c];
      const double t = var == 0 ? in.truths[i].swh.values[c] : in.truths[i].mwp.values[c];
      total += std::abs(p - t) / t;
      ++n;
    }
  return total / n;
}

/// RMSE and count for truth SWH in [b + 0.5, b + 1.5).
inline std::pair<double, std::size_t> oracle_height_bin(const Instance& in, int var, std::size_t b) {
  const double lo = static_cast<double>(b) + 0.5, hi = lo + 1.0;
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < in.preds.size(); ++i)
    for (std::size_t y = 0; y < in.geom.lat_count; ++y)
      for (std::size_t x = 0; x < in.geom.lon_count; ++x) {
        const double h = in.truths[i].swh.at(y, x);
        if (std::isnan(h) || h < lo || h >= hi) continue;
        const double e = oracle_error(in, var, i, y, x);
        if (std::isnan(e)) continue;
        sq += e * e;
        ++n;
      }
  return {n ? std::sqrt(sq / static_cast<double>(n)) : kMissing, n};
}

/// Cos-latitude weighted centred anomaly correlation.
inline double oracle_acc(const GridField& p, const GridField& t, const GridField& cl, const LandMask& mask) {
  const auto& g = p.geom;
  double w = 0, ma = 0, mb = 0;
  for (std::size_t c = 0; c < g.cells(); ++c) {
    if (!mask.ocean(c)) continue;
    const double wc = std::cos(g.lat(c / g.lon_count) * std::numbers::pi / 180.0);
    w += wc;
    ma += wc * (p.values[c] - cl.values[c]);
    mb += wc * (t.values[c] - cl.values[c]);
  }
  ma /= w;
  mb /= w;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t c = 0; c < g.cells(); ++c) {
    if (!mask.ocean(c)) continue;
    const double wc = std::cos(g.lat(c / g.lon_count) * std::numbers::pi / 180.0);
    const double a = p.values[c] - cl.values[c] - ma, b = t.values[c] - cl.values[c] - mb;
    sab += wc * a * b;
    saa += wc * a * a;
    sbb += wc * b * b;
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace wavecast::testing
