#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wavecast/errors.hpp"
#include "wavecast/grid.hpp"
#include "wavecast/wgf.hpp"

namespace wavecast {

enum class WaveVar { SWH, MWP, MWD };

inline constexpr std::array<WaveVar, 3> kWaveVars{WaveVar::SWH, WaveVar::MWP, WaveVar::MWD};

inline const char* wave_var_name(WaveVar v) {
  switch (v) {
    case WaveVar::SWH: return "swh";
    case WaveVar::MWP: return "mwp";
    case WaveVar::MWD: return "mwd";
  }
  return "?";
}

/// Direction is scored only where the true SWH reaches this height.
inline constexpr double kDirectionMinSwh = 0.1;

/// Smallest angle between two directions, in [0, 180].
inline double circ_diff(double a_deg, double b_deg) {
  const double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return std::min(d, 360.0 - d);
}

/// Physical field for a variable; MWD is decoded from its sin/cos pair.
inline GridField variable_field(const WaveState& w, WaveVar v) {
  switch (v) {
    case WaveVar::SWH: return w.swh;
    case WaveVar::MWP: return w.mwp;
    case WaveVar::MWD: return wave_direction(w);
  }
  throw ContractError("unknown wave variable");
}

/// Forecast/truth pairs for one lead, pre-decoded into per-variable fields.
class ScoredSet {
 public:
  ScoredSet(std::span<const WaveState> preds, std::span<const WaveState> truths, const LandMask& mask) : mask_(mask) {
    if (preds.size() != truths.size()) {
      throw ContractError(std::to_string(preds.size()) + " forecasts but " + std::to_string(truths.size()) + " truths");
    }
    if (preds.empty()) throw DomainError("no forecast instances to score");
    for (std::size_t i = 0; i < preds.size(); ++i) {
      require_same_geometry(preds[i].geometry(), mask.geometry(), "forecast");
      require_same_geometry(truths[i].geometry(), mask.geometry(), "truth");
      for (WaveVar v : kWaveVars) {
        pred_[static_cast<int>(v)].push_back(variable_field(preds[i], v));
        truth_[static_cast<int>(v)].push_back(variable_field(truths[i], v));
      }
    }
  }

  std::size_t size() const { return pred_[0].size(); }
  const LandMask& mask() const { return mask_; }
  const GridField& pred(WaveVar v, std::size_t i) const { return pred_[static_cast<int>(v)][i]; }
  const GridField& truth(WaveVar v, std::size_t i) const { return truth_[static_cast<int>(v)][i]; }

  /// Error at (instance, cell) or NaN where the point is excluded from scoring.
  double error(WaveVar v, std::size_t i, std::size_t cell) const {
    if (!mask_.ocean(cell)) return kMissing;
    const double p = pred(v, i).values[cell], t = truth(v, i).values[cell];
    if (v == WaveVar::MWD) {
      if (!(truth(WaveVar::SWH, i).values[cell] >= kDirectionMinSwh) || std::isnan(p) || std::isnan(t)) return kMissing;
      return circ_diff(p, t);
    }
    return p - t;
  }

 private:
  LandMask mask_;
  std::array<std::vector<GridField>, 3> pred_, truth_;
};

inline GridField metric_field(const GridGeometry& g, VarId var, Units units) {
  return GridField(var, units, g, kStaticTime, kMissing);
}

inline Units variable_units(WaveVar v) {
  return v == WaveVar::SWH ? Units::Meters : v == WaveVar::MWP ? Units::Seconds : Units::Degrees;
}

inline VarId variable_id(WaveVar v) {
  return v == WaveVar::SWH ? VarId::SWH : v == WaveVar::MWP ? VarId::MWP : VarId::MWD;
}

/// Per-cell RMSE over instances; NaN on land and where no instance was scorable.
inline GridField rmse_map(const ScoredSet& s, WaveVar v) {
  GridField out = metric_field(s.mask().geometry(), variable_id(v), variable_units(v));
  for (std::size_t c = 0; c < s.mask().cells(); ++c) {
    if (!s.mask().ocean(c)) continue;
    double sq = 0.0, n = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double e = s.error(v, i, c);
      if (std::isnan(e)) continue;
      sq += e * e;
      n += 1.0;
    }
    if (n > 0.0) out.values[c] = std::sqrt(sq / n);
  }
  return out;
}

/// cos(latitude) weight per row, or all ones.
inline std::vector<double> row_weights(const GridGeometry& g, bool lat_weighted) {
  std::vector<double> w(g.lat_count, 1.0);
  if (lat_weighted) {
    for (std::size_t i = 0; i < g.lat_count; ++i) w[i] = std::cos(g.lat(i) * std::numbers::pi / 180.0);
  }
  return w;
}

/// Area-weighted RMSE over every scorable (instance, cell).
inline double global_rmse(const ScoredSet& s, WaveVar v, bool lat_weighted = true) {
  const GridGeometry& g = s.mask().geometry();
  const auto w = row_weights(g, lat_weighted);
  double sq = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t c = 0; c < s.mask().cells(); ++c) {
      const double e = s.error(v, i, c);
      if (std::isnan(e)) continue;
      const double wc = w[c / g.lon_count];
      sq += wc * e * e;
      wsum += wc;
    }
  if (wsum == 0.0) throw EmptySelectionError(std::string("no scorable points for ") + wave_var_name(v));
  return std::sqrt(sq / wsum);
}

struct MreResult {
  double value = 0.0;
  std::size_t count = 0;
  GridField map;  // per-cell MRE; NaN where no point passed the filter
};

/// Mean of |pred - truth| / truth over points whose true SWH is at least `threshold` metres.
inline MreResult mre_threshold(const ScoredSet& s, WaveVar v, double threshold = 1.0) {
  if (v == WaveVar::MWD) throw ContractError("relative error is undefined for direction");
  if (!(threshold > 0.0)) throw DomainError("MRE threshold must be > 0");
  MreResult r;
  r.map = metric_field(s.mask().geometry(), VarId::Generic, Units::None);
  double total = 0.0;
  for (std::size_t c = 0; c < s.mask().cells(); ++c) {
    if (!s.mask().ocean(c)) continue;
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!(s.truth(WaveVar::SWH, i).values[c] >= threshold)) continue;
      const double t = s.truth(v, i).values[c];
      acc += std::abs(s.pred(v, i).values[c] - t) / t;
      ++n;
    }
    if (n == 0) continue;
    r.map.values[c] = acc / static_cast<double>(n);
    total += acc;
    r.count += n;
  }
  if (r.count == 0) {
    throw EmptySelectionError("no point has true SWH >= " + std::to_string(threshold) + " m");
  }
  r.value = total / static_cast<double>(r.count);
  return r;
}

/// Truth-SWH bins centred on 1..8 m, half-width 0.5 m.
struct HeightBins {
  static constexpr std::size_t kCount = 8;
  static constexpr double kHalfWidth = 0.5;
  static double center(std::size_t b) { return static_cast<double>(b + 1); }
  /// Bin index for a height, or kCount when outside [0.5, 8.5).
  static std::size_t index(double h) {
    if (!(h >= 0.5 && h < 8.5)) return kCount;
    return std::min(kCount - 1, static_cast<std::size_t>(std::floor(h - 0.5)));
  }
};

struct BinScore {
  double rmse = kMissing;  // NaN marks an empty bin
  std::size_t count = 0;
};

using HeightTable = std::array<std::array<BinScore, HeightBins::kCount>, 3>;

/// RMSE per variable per truth-SWH bin. Empty bins stay missing.
inline HeightTable rmse_by_height(const ScoredSet& s) {
  HeightTable t{};
  std::array<std::array<double, HeightBins::kCount>, 3> sq{};
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t c = 0; c < s.mask().cells(); ++c) {
      if (!s.mask().ocean(c)) continue;
      const std::size_t b = HeightBins::index(s.truth(WaveVar::SWH, i).values[c]);
      if (b == HeightBins::kCount) continue;
      for (WaveVar v : kWaveVars) {
        const double e = s.error(v, i, c);
        if (std::isnan(e)) continue;
        sq[static_cast<int>(v)][b] += e * e;
        ++t[static_cast<int>(v)][b].count;
      }
    }
  for (std::size_t v = 0; v < 3; ++v)
    for (std::size_t b = 0; b < HeightBins::kCount; ++b)
      if (t[v][b].count) t[v][b].rmse = std::sqrt(sq[v][b] / static_cast<double>(t[v][b].count));
  return t;
}

/// Area-weighted centred correlation of (pred - clim) and (truth - clim) over ocean.
inline double acc(const GridField& pred, const GridField& truth, const GridField& clim, const LandMask& mask,
                  bool lat_weighted = true) {
  const GridGeometry& g = mask.geometry();
  for (const GridField* f : {&pred, &truth, &clim}) require_same_geometry(f->geom, g, "acc");
  const auto w = row_weights(g, lat_weighted);
  double wsum = 0.0, ma = 0.0, mb = 0.0;
  for (std::size_t c = 0; c < mask.cells(); ++c) {
    if (!mask.ocean(c)) continue;
    const double wc = w[c / g.lon_count];
    wsum += wc;
    ma += wc * (pred.values[c] - clim.values[c]);
    mb += wc * (truth.values[c] - clim.values[c]);
  }
  ma /= wsum;
  mb /= wsum;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t c = 0; c < mask.cells(); ++c) {
    if (!mask.ocean(c)) continue;
    const double wc = w[c / g.lon_count];
    const double a = pred.values[c] - clim.values[c] - ma;
    const double b = truth.values[c] - clim.values[c] - mb;
    sab += wc * a * b;
    saa += wc * a * a;
    sbb += wc * b * b;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw UndefinedScoreError("anomaly variance is zero");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Mean per-instance ACC for SWH or MWP.
inline double mean_acc(const ScoredSet& s, WaveVar v, const GridField& clim, bool lat_weighted = true) {
  if (v == WaveVar::MWD) throw ContractError("ACC is not defined for direction");
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) total += acc(s.pred(v, i), s.truth(v, i), clim, s.mask(), lat_weighted);
  return total / static_cast<double>(s.size());
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("spearman needs two equal-length series of size >= 2");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n, my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedScoreError("spearman of a constant series");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace wavecast
