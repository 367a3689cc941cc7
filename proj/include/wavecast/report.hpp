#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "wavecast/dataset.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/metrics.hpp"
#include "wavecast/rollout.hpp"
#include "wavecast/wgf.hpp"

namespace wavecast {

struct LeadScores {
  std::array<double, 3> rmse{};  // swh m, mwp s, mwd deg
  double mre_swh = kMissing;
  double mre_mwp = kMissing;
  double acc_swh = kMissing;
  double acc_mwp = kMissing;
};

/// Everything scored for one labelled set of forecasts.
struct LabelReport {
  std::string label;
  std::vector<std::int64_t> inits;
  std::vector<LeadScores> leads;
  std::vector<std::array<GridField, 3>> rmse_maps;  // [lead][var]
  std::vector<std::array<GridField, 2>> mre_maps;   // [lead][swh, mwp]
  std::vector<HeightTable> height;                  // [lead]
};

struct EvalOptions {
  bool lat_weighted = true;
  double mre_threshold = 1.0;
};

/// Scores forecasts against a truth lookup. Every series must carry the same number of leads.
template <typename TruthFn>
LabelReport evaluate_forecasts(const std::string& label, std::span<const ForecastSeries> forecasts, TruthFn&& truth,
                               const LandMask& mask, const GridField* clim_swh, const GridField* clim_mwp,
                               const EvalOptions& opt = {}) {
  if (forecasts.empty()) throw DomainError("no forecasts to evaluate for '" + label + "'");
  const std::size_t leads = forecasts[0].leads.size();
  LabelReport r;
  r.label = label;
  for (const auto& s : forecasts) {
    if (s.leads.size() != leads) throw ContractError("forecasts for '" + label + "' have differing lead counts");
    r.inits.push_back(s.init);
  }
  for (std::size_t k = 0; k < leads; ++k) {
    std::vector<WaveState> preds, truths;
    for (const auto& s : forecasts) {
      preds.push_back(s.leads[k]);
      truths.push_back(truth(s.valid_time(k)));
    }
    const ScoredSet set(preds, truths, mask);
    LeadScores sc;
    std::array<GridField, 3> maps;
    for (WaveVar v : kWaveVars) {
      sc.rmse[static_cast<int>(v)] = global_rmse(set, v, opt.lat_weighted);
      maps[static_cast<int>(v)] = rmse_map(set, v);
    }
    MreResult ms = mre_threshold(set, WaveVar::SWH, opt.mre_threshold);
    MreResult mp = mre_threshold(set, WaveVar::MWP, opt.mre_threshold);
    sc.mre_swh = ms.value;
    sc.mre_mwp = mp.value;
    if (clim_swh) sc.acc_swh = mean_acc(set, WaveVar::SWH, *clim_swh, opt.lat_weighted);
    if (clim_mwp) sc.acc_mwp = mean_acc(set, WaveVar::MWP, *clim_mwp, opt.lat_weighted);
    r.leads.push_back(sc);
    r.rmse_maps.push_back(std::move(maps));
    r.mre_maps.push_back({std::move(ms.map), std::move(mp.map)});
    r.height.push_back(rmse_by_height(set));
  }
  return r;
}

inline LabelReport evaluate_forecasts(const std::string& label, std::span<const ForecastSeries> forecasts,
                                      const Dataset& data, const EvalOptions& opt = {}) {
  const GridField* cs = nullptr;
  const GridField* cm = nullptr;
  try {
    cs = &data.climatology(VarId::SWH);
    cm = &data.climatology(VarId::MWP);
  } catch (const DataError&) {
    cs = cm = nullptr;
  }
  return evaluate_forecasts(label, forecasts, [&](std::int64_t t) { return data.wave(t); }, data.mask(), cs, cm, opt);
}

struct SkillRow {
  std::string label;
  WaveVar var;
  std::size_t lead;  // 1-based
  double rmse;
};

/// Per-lead global RMSE for every label and variable. All labels must cover the same inits and leads.
inline std::vector<SkillRow> skill_curves(std::span<const LabelReport> reports) {
  std::vector<SkillRow> rows;
  if (reports.empty()) return rows;
  for (const auto& r : reports) {
    if (r.inits != reports[0].inits || r.leads.size() != reports[0].leads.size()) {
      throw ContractError("skill curves need a common test period: '" + r.label + "' differs from '" +
                          reports[0].label + "'");
    }
  }
  for (const auto& r : reports)
    for (WaveVar v : kWaveVars)
      for (std::size_t k = 0; k < r.leads.size(); ++k) rows.push_back({r.label, v, k + 1, r.leads[k].rmse[static_cast<int>(v)]});
  return rows;
}

// ---------------------------------------------------------------------------
// CSV and image output

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

inline std::string format_coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// lat,lon,value rows for every cell; missing cells have an empty value.
inline std::string render_map_csv(const GridField& f) {
  std::string out = "lat,lon,value\n";
  const auto& g = f.geom;
  for (std::size_t i = 0; i < g.lat_count; ++i)
    for (std::size_t j = 0; j < g.lon_count; ++j)
      out += format_coord(g.lat(i)) + "," + format_coord(g.lon0 + g.dlon * static_cast<double>(j)) + "," +
             csv_number(f.at(i, j)) + "\n";
  return out;
}

/// Binary PPM heatmap, north at the top; missing cells grey. Range from the finite values.
inline std::vector<std::uint8_t> render_ppm(const GridField& f, std::size_t scale = 4) {
  const auto& g = f.geom;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : f.values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const std::string header = "P6\n" + std::to_string(g.lon_count * scale) + " " + std::to_string(g.lat_count * scale) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::size_t y = 0; y < g.lat_count * scale; ++y) {
    const std::size_t i = g.lat_count - 1 - y / scale;
    for (std::size_t x = 0; x < g.lon_count * scale; ++x) {
      const double v = f.at(i, x / scale);
      std::uint8_t rgb[3] = {128, 128, 128};
      if (std::isfinite(v)) {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        rgb[0] = static_cast<std::uint8_t>(std::lround(255.0 * t));
        rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::abs(2.0 * t - 1.0))));
        rgb[2] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
      }
      out.insert(out.end(), rgb, rgb + 3);
    }
  }
  return out;
}

/// fig3 RMSE maps, fig4 MRE maps and the fig5 height table for one label.
inline std::vector<std::filesystem::path> write_figure_products(const LabelReport& r, const std::filesystem::path& dir,
                                                                bool ppm = false) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::filesystem::path& p, const std::string& text) {
    write_text_file(p, text);
    written.push_back(p);
  };
  std::string fig5 = "variable,bin,lead,value,count\n";
  for (std::size_t k = 0; k < r.leads.size(); ++k) {
    const std::string lead = std::to_string(k + 1);
    for (WaveVar v : kWaveVars) {
      const GridField& m = r.rmse_maps[k][static_cast<int>(v)];
      const std::string stem = std::string("fig3_rmse_map_") + wave_var_name(v) + "_" + lead;
      emit(dir / (stem + ".csv"), render_map_csv(m));
      if (ppm) {
        write_file_bytes(dir / (stem + ".ppm"), render_ppm(m));
        written.push_back(dir / (stem + ".ppm"));
      }
    }
    for (int v = 0; v < 2; ++v) {
      emit(dir / (std::string("fig4_mre_") + (v == 0 ? "swh" : "mwp") + "_" + lead + ".csv"),
           render_map_csv(r.mre_maps[k][v]));
    }
    for (WaveVar v : kWaveVars)
      for (std::size_t b = 0; b < HeightBins::kCount; ++b) {
        const BinScore& s = r.height[k][static_cast<int>(v)][b];
        fig5 += std::string(wave_var_name(v)) + "," + std::to_string(b + 1) + "," + lead + "," + csv_number(s.rmse) +
                "," + std::to_string(s.count) + "\n";
      }
  }
  emit(dir / "fig5_rmse_by_height.csv", fig5);
  return written;
}

inline std::string render_skill_csv(std::span<const SkillRow> rows) {
  std::string out = "label,variable,lead,rmse\n";
  for (const auto& r : rows) {
    out += r.label + "," + wave_var_name(r.var) + "," + std::to_string(r.lead) + "," + csv_number(r.rmse) + "\n";
  }
  return out;
}

inline std::string render_summary_csv(std::span<const LabelReport> reports) {
  std::string out = "label,lead,rmse_swh,rmse_mwp,rmse_mwd,mre1m_swh,mre1m_mwp,acc_swh,acc_mwp\n";
  for (const auto& r : reports)
    for (std::size_t k = 0; k < r.leads.size(); ++k) {
      const LeadScores& s = r.leads[k];
      out += r.label + "," + std::to_string(k + 1) + "," + csv_number(s.rmse[0]) + "," + csv_number(s.rmse[1]) + "," +
             csv_number(s.rmse[2]) + "," + csv_number(s.mre_swh) + "," + csv_number(s.mre_mwp) + "," +
             csv_number(s.acc_swh) + "," + csv_number(s.acc_mwp) + "\n";
    }
  return out;
}

}  // namespace wavecast
