#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wavecast/config.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/metrics.hpp"
#include "wavecast/report.hpp"
#include "wavecast/rollout.hpp"
#include "wavecast/synth.hpp"
#include "wavecast/training.hpp"

#ifndef WAVECAST_VERSION
#define WAVECAST_VERSION "unknown"
#endif

// The five tool subcommands as library calls. Each takes a RunConfig, writes
// into `out`, and stamps the directory with run-config.echo and VERSION.

namespace wavecast {

inline constexpr const char* kRunConfigEcho = "run-config.echo";
inline constexpr const char* kVersionFile = "VERSION";

inline std::filesystem::path require_path(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw UsageError("missing --" + key);
  return v;
}

inline void stamp_output_dir(const RunConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  write_text_file(out / kRunConfigEcho, cfg.render());
  write_text_file(out / kVersionFile, std::string("wavecast ") + WAVECAST_VERSION + "\n");
}

/// "train", "val" or "test" selects every init of that split; anything else is one ISO time.
inline std::vector<std::int64_t> select_inits(const Dataset& data, const std::string& spec) {
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    if (spec == split_name(s)) {
      if (data.samples(s).empty()) throw EmptySelectionError("split '" + spec + "' has no samples");
      return data.samples(s);
    }
  }
  try {
    return {parse_iso_time(spec)};
  } catch (const Error&) {
    throw ConfigError("init must be a split name or an ISO time, got '" + spec + "'");
  }
}

// ---------------------------------------------------------------------------

inline std::filesystem::path run_synth(const RunConfig& cfg) {
  const auto out = require_path(cfg, "out");
  const SynthConfig sc = cfg.synth();
  gen_dataset(sc, out);
  stamp_output_dir(cfg, out);
  return out / layout::kDatasetManifest;
}

inline TrainResult run_train(const RunConfig& cfg, const std::function<void(const std::string&)>& log = {}) {
  const auto out = require_path(cfg, "out");
  const Dataset data = Dataset::open(require_path(cfg, "data"));
  const TrainConfig tc = cfg.train();
  auto model = cfg.make_model(data.geometry());
  std::optional<std::filesystem::path> resume;
  if (!cfg.get("resume").empty()) resume = cfg.get("resume");
  stamp_output_dir(cfg, out);
  return train(*model, data, tc, out, resume, log);
}

/// Loads a checkpoint and checks it was trained on data normalised like `data`.
inline std::unique_ptr<Model> open_checkpoint_for(const std::filesystem::path& path, const Dataset& data) {
  const Checkpoint c = load_checkpoint(path);
  require_same_geometry(c.geom, data.geometry(), "checkpoint " + path.string());
  if (!(c.stats == data.stats())) {
    throw ConfigConflictError("checkpoint " + path.string() + " was trained with different normalisation stats");
  }
  return load_model(c);
}

inline std::filesystem::path run_rollout(const RunConfig& cfg) {
  const auto out = require_path(cfg, "out");
  const auto ckpt = require_path(cfg, "checkpoint");
  const Dataset data = Dataset::open(require_path(cfg, "data"));
  auto model = open_checkpoint_for(ckpt, data);
  const auto inits = select_inits(data, cfg.get("init"));
  const auto winds = open_wind_source(cfg.get("wind"), data);
  const std::size_t leads = cfg.count("leads");
  const auto series = rollout(*model, data, inits, leads, *winds, cfg.count("rollout_batch"));
  stamp_output_dir(cfg, out);
  write_forecasts(series, ForecastInfo{winds->tag(), leads, data.dt(), model_kind_name(model->kind())}, out);
  return out / layout::kForecastIndex;
}

// ---------------------------------------------------------------------------
// evaluate

struct LabelledDir {
  std::string label;
  std::filesystem::path dir;
};

inline std::vector<LabelledDir> parse_forecast_list(const std::string& spec) {
  std::vector<LabelledDir> out;
  std::set<std::string> seen;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t end = std::min(spec.find(',', start), spec.size());
    const std::string item = spec.substr(start, end - start);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw ConfigError("forecasts entries must be label=dir, got '" + item + "'");
    }
    LabelledDir d{item.substr(0, eq), item.substr(eq + 1)};
    if (!seen.insert(d.label).second) throw ConfigError("forecast label '" + d.label + "' given twice");
    out.push_back(std::move(d));
    start = end + 1;
  }
  return out;
}

inline constexpr const char* kPersistenceLabel = "persistence";
inline constexpr const char* kSkillCsv = "fig7_skill_curves.csv";
inline constexpr const char* kSummaryCsv = "metrics_summary.csv";

struct EvaluateResult {
  std::vector<LabelReport> reports;  // inputs in order, then persistence unless supplied
  std::vector<std::filesystem::path> written;
};

inline void require_forecast_geometry(std::span<const ForecastSeries> fc, const Dataset& data, const std::string& label) {
  for (const auto& s : fc) {
    if (s.dt != data.dt()) {
      throw ContractError("forecasts '" + label + "' step " + std::to_string(s.dt) + " s differs from the dataset's " +
                          std::to_string(data.dt()) + " s");
    }
    for (const auto& w : s.leads) {
      for (const GridField* f : {&w.swh, &w.mwp, &w.mwd_sin, &w.mwd_cos}) {
        require_same_geometry(f->geom, data.geometry(), "forecasts '" + label + "' vs truth");
      }
    }
  }
}

/// Scores every labelled forecast set plus persistence on the same inits. The first
/// label's figure products go to `out`, the others' to `out/<label>`.
inline EvaluateResult run_evaluate(const RunConfig& cfg) {
  const auto out = require_path(cfg, "out");
  const Dataset data = Dataset::open(require_path(cfg, "data"));
  if (cfg.get("forecasts").empty()) throw UsageError("missing --forecasts");
  const auto inputs = parse_forecast_list(cfg.get("forecasts"));
  const EvalOptions opt{cfg.flag("lat_weighted"), cfg.real("mre_threshold")};
  const bool ppm = cfg.flag("ppm");

  EvaluateResult r;
  std::vector<ForecastSeries> first;
  bool has_persistence = false;
  for (const auto& in : inputs) {
    const auto fc = read_forecasts(in.dir);
    require_forecast_geometry(fc, data, in.label);
    r.reports.push_back(evaluate_forecasts(in.label, fc, data, opt));
    has_persistence = has_persistence || in.label == kPersistenceLabel;
    if (first.empty()) first = fc;
  }
  if (!has_persistence) {
    std::vector<std::int64_t> inits;
    for (const auto& s : first) inits.push_back(s.init);
    const auto pf = persistence_forecasts(data, inits, first.front().leads.size());
    r.reports.push_back(evaluate_forecasts(kPersistenceLabel, pf, data, opt));
  }
  const auto skill = skill_curves(r.reports);

  stamp_output_dir(cfg, out);
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    const auto dir = i == 0 ? out : out / r.reports[i].label;
    for (auto& p : write_figure_products(r.reports[i], dir, ppm)) r.written.push_back(std::move(p));
  }
  write_text_file(out / kSkillCsv, render_skill_csv(skill));
  write_text_file(out / kSummaryCsv, render_summary_csv(r.reports));
  r.written.push_back(out / kSkillCsv);
  r.written.push_back(out / kSummaryCsv);
  return r;
}

// ---------------------------------------------------------------------------
// case study

struct Window {
  std::size_t row = 0, col = 0, rows = 0, cols = 0;
};

/// "row,col,rows,cols"; must lie inside the grid (no longitude wrap).
inline Window parse_window(const std::string& spec, const GridGeometry& g) {
  std::vector<std::size_t> v;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t end = std::min(spec.find(',', start), spec.size());
    v.push_back(parse_count(spec.substr(start, end - start), "window"));
    start = end + 1;
  }
  if (v.size() != 4) throw ConfigError("window must be row,col,rows,cols or auto, got '" + spec + "'");
  const Window w{v[0], v[1], v[2], v[3]};
  if (w.rows == 0 || w.cols == 0 || w.row + w.rows > g.lat_count || w.col + w.cols > g.lon_count) {
    throw BoundsError("window " + spec + " lies outside the " + std::to_string(g.lat_count) + "x" +
                      std::to_string(g.lon_count) + " grid");
  }
  return w;
}

/// Square window of edge `size` (clipped to the grid) centred on (r, c) as far as the edges allow.
inline Window centred_window(std::size_t r, std::size_t c, std::size_t size, const GridGeometry& g) {
  const std::size_t rows = std::min(size, g.lat_count), cols = std::min(size, g.lon_count);
  auto place = [](std::size_t centre, std::size_t edge, std::size_t n) {
    const std::size_t lo = centre >= edge / 2 ? centre - edge / 2 : 0;
    return std::min(lo, n - edge);
  };
  return Window{place(r, rows, g.lat_count), place(c, cols, g.lon_count), rows, cols};
}

inline GridField crop(const GridField& f, const Window& w) {
  GridGeometry g = f.geom;
  g.lat_count = w.rows;
  g.lon_count = w.cols;
  g.lat0 = f.geom.lat(w.row);
  g.lon0 = f.geom.lon(w.col);
  GridField out(f.var, f.units, g, f.valid_time);
  for (std::size_t i = 0; i < w.rows; ++i)
    for (std::size_t j = 0; j < w.cols; ++j) out.at(i, j) = f.at(w.row + i, w.col + j);
  return out;
}

struct CellValue {
  double value = kMissing;
  std::size_t row = 0, col = 0;  // full-grid indices
};

/// Largest finite ocean value inside the window; first in row-major order on ties.
inline CellValue window_max(const GridField& f, const LandMask& mask, const Window& w) {
  CellValue best;
  for (std::size_t i = w.row; i < w.row + w.rows; ++i)
    for (std::size_t j = w.col; j < w.col + w.cols; ++j) {
      const double v = f.at(i, j);
      if (!mask.ocean(i * f.geom.lon_count + j) || !std::isfinite(v)) continue;
      if (std::isnan(best.value) || v > best.value) best = {v, i, j};
    }
  return best;
}

inline constexpr std::size_t kCaseLeads[3] = {1, 4, 7};
inline constexpr const char* kCaseReportCsv = "case_study.csv";
inline constexpr const char* kCaseReportHeader =
    "lead,valid_time,truth_max_swh,pred_max_swh,max_swh_error_m,truth_row,truth_col,pred_row,pred_col,"
    "center_displacement_cells\n";

struct CaseLead {
  std::size_t lead = 0;
  std::int64_t valid_time = 0;
  CellValue truth, pred;
  double max_swh_error = kMissing;       // pred - truth, m
  double center_displacement = kMissing; // cells
};

struct CaseStudy {
  std::int64_t init = 0;
  Window window;
  std::vector<CaseLead> leads;
  std::string report_csv;
};

/// With a split name as `init`, picks the init whose lead-4 truth holds the largest SWH.
inline std::int64_t pick_case_init(const Dataset& data, const std::string& spec) {
  const auto inits = select_inits(data, spec);
  std::int64_t best = inits.front();
  double best_v = -1.0;
  for (std::int64_t t : inits) {
    const WaveState w = data.wave(t + 4 * data.dt());
    for (std::size_t c = 0; c < data.mask().cells(); ++c) {
      if (data.mask().ocean(c) && w.swh.values[c] > best_v) {
        best_v = w.swh.values[c];
        best = t;
      }
    }
  }
  return best;
}

inline CaseStudy run_case_study(const RunConfig& cfg) {
  const auto out = require_path(cfg, "out");
  const auto ckpt = require_path(cfg, "checkpoint");
  const Dataset data = Dataset::open(require_path(cfg, "data"));
  const auto& g = data.geometry();
  std::optional<Window> window;
  if (cfg.get("window") != "auto") window = parse_window(cfg.get("window"), g);
  auto model = open_checkpoint_for(ckpt, data);
  const auto winds = open_wind_source(cfg.get("wind"), data);

  CaseStudy cs;
  cs.init = pick_case_init(data, cfg.get("init"));
  const std::int64_t inits[1] = {cs.init};
  const ForecastSeries fc = std::move(rollout(*model, data, inits, kCaseLeads[2], *winds, 1).front());
  if (!window) {
    const WaveState mid = data.wave(fc.valid_time(3));
    const CellValue peak = window_max(mid.swh, data.mask(), Window{0, 0, g.lat_count, g.lon_count});
    window = centred_window(peak.row, peak.col, cfg.count("window_size"), g);
  }
  cs.window = *window;

  stamp_output_dir(cfg, out);
  const bool ppm = cfg.flag("ppm");
  cs.report_csv = kCaseReportHeader;
  for (std::size_t lead : kCaseLeads) {
    const WaveState& pred = fc.leads[lead - 1];
    const WaveState truth = data.wave(fc.valid_time(lead - 1));
    const std::pair<const char*, const WaveState*> sources[2] = {{"pred", &pred}, {"truth", &truth}};
    for (const auto& [name, w] : sources) {
      const GridField fields[3] = {w->swh, w->mwp, wave_direction(*w)};
      for (int v = 0; v < 3; ++v) {
        const std::string stem = "lead" + std::to_string(lead) + "_" + name + "_" +
                                 wave_var_name(static_cast<WaveVar>(v));
        const GridField c = crop(fields[v], cs.window);
        write_text_file(out / (stem + ".csv"), render_map_csv(c));
        if (ppm) write_file_bytes(out / (stem + ".ppm"), render_ppm(c));
      }
    }
    CaseLead cl{lead, fc.valid_time(lead - 1), window_max(truth.swh, data.mask(), cs.window),
                window_max(pred.swh, data.mask(), cs.window)};
    cl.max_swh_error = cl.pred.value - cl.truth.value;
    cl.center_displacement = std::hypot(static_cast<double>(cl.pred.row) - static_cast<double>(cl.truth.row),
                                        static_cast<double>(cl.pred.col) - static_cast<double>(cl.truth.col));
    cs.report_csv += std::to_string(lead) + "," + format_iso_time(cl.valid_time) + "," + csv_number(cl.truth.value) +
                     "," + csv_number(cl.pred.value) + "," + csv_number(cl.max_swh_error) + "," +
                     std::to_string(cl.truth.row) + "," + std::to_string(cl.truth.col) + "," +
                     std::to_string(cl.pred.row) + "," + std::to_string(cl.pred.col) + "," +
                     csv_number(cl.center_displacement) + "\n";
    cs.leads.push_back(cl);
  }
  write_text_file(out / kCaseReportCsv, cs.report_csv);
  return cs;
}

}  // namespace wavecast
