#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wavecast/dataset.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/kv.hpp"
#include "wavecast/model.hpp"
#include "wavecast/training.hpp"
#include "wavecast/wgf.hpp"

namespace wavecast {

/// Predicted physical wave states for leads 1..L from one initialisation.
struct ForecastSeries {
  std::int64_t init = 0;
  std::int64_t dt = 0;
  std::string wind_source;
  std::vector<WaveState> leads;  // leads[k] is valid at init + (k + 1) * dt

  std::int64_t valid_time(std::size_t k) const { return init + static_cast<std::int64_t>(k + 1) * dt; }
};

/// Autoregressive forecasts. History comes from the truth archive up to each init;
/// every later wave input is the model's own prediction, and every wind input is
/// drawn from `winds`. Inits are processed in batches of `batch`.
inline std::vector<ForecastSeries> rollout(Model& model, const Dataset& data, std::span<const std::int64_t> inits,
                                           std::size_t leads, const WindSource& winds, std::size_t batch = 8) {
  if (leads == 0) throw ConfigError("rollout needs at least one lead");
  if (batch == 0) throw ConfigError("rollout batch must be >= 1");
  const std::int64_t dt = data.dt();
  const std::size_t t_in = model.t_in(), t_force = model.t_force();
  const auto& g = data.geometry();
  const std::size_t frame = 4 * g.cells();
  std::vector<ForecastSeries> out;
  for (std::size_t b0 = 0; b0 < inits.size(); b0 += batch) {
    const auto group = inits.subspan(b0, std::min(batch, inits.size() - b0));
    const std::size_t nb = group.size();
    // states[i] holds the normalised history of init i, oldest first.
    std::vector<std::vector<Tensor>> states(nb);
    for (std::size_t i = 0; i < nb; ++i)
      for (std::int64_t t : history_times(group[i], t_in, dt)) states[i].push_back(data.wave_tensor(t));
    std::vector<ForecastSeries> series(nb);
    for (std::size_t i = 0; i < nb; ++i) series[i] = ForecastSeries{group[i], dt, winds.tag(), {}};

    for (std::size_t lead = 0; lead < leads; ++lead) {
      std::vector<Tensor> wave_stacks, wind_stacks;
      for (std::size_t i = 0; i < nb; ++i) {
        std::vector<const Tensor*> hist;
        for (std::size_t k = states[i].size() - t_in; k < states[i].size(); ++k) hist.push_back(&states[i][k]);
        wave_stacks.push_back(stack(hist));
        const std::int64_t step_init = group[i] + static_cast<std::int64_t>(lead) * dt;
        std::vector<Tensor> w;
        for (std::int64_t t : forcing_times(step_init, t_force, dt)) w.push_back(winds.wind(t));
        std::vector<const Tensor*> wp;
        for (const auto& t : w) wp.push_back(&t);
        wind_stacks.push_back(stack(wp));
      }
      std::vector<const Tensor*> wsp, fsp;
      for (const auto& t : wave_stacks) wsp.push_back(&t);
      for (const auto& t : wind_stacks) fsp.push_back(&t);
      const Tensor pred = predict(model, ModelInput{stack(wsp), stack(fsp)}, data.terrain());
      for (std::size_t i = 0; i < nb; ++i) {
        const std::span<const double> chunk(pred.storage().data() + i * frame, frame);
        states[i].push_back(Tensor({4, g.lat_count, g.lon_count}, std::vector<double>(chunk.begin(), chunk.end())));
        series[i].leads.push_back(denormalize(chunk, data.stats(), data.mask(), series[i].valid_time(lead)));
      }
    }
    for (auto& s : series) out.push_back(std::move(s));
  }
  return out;
}

/// Every lead repeats the state at init.
inline ForecastSeries persistence_forecast(const WaveState& init_state, std::int64_t dt, std::size_t leads) {
  ForecastSeries s{init_state.valid_time(), dt, "persistence", {}};
  for (std::size_t k = 0; k < leads; ++k) {
    WaveState w = init_state;
    for (GridField* f : {&w.swh, &w.mwp, &w.mwd_sin, &w.mwd_cos}) f->valid_time = s.valid_time(k);
    s.leads.push_back(std::move(w));
  }
  return s;
}

inline std::vector<ForecastSeries> persistence_forecasts(const Dataset& data, std::span<const std::int64_t> inits,
                                                         std::size_t leads) {
  std::vector<ForecastSeries> out;
  for (std::int64_t t : inits) out.push_back(persistence_forecast(data.wave(t), data.dt(), leads));
  return out;
}

// ---------------------------------------------------------------------------
// On-disk forecasts. A forecast directory holds forecast.info, forecasts.index
// (one init per line with its subdirectory) and, per init, a manifest of
// SWH/MWP/MWD_SIN/MWD_COS fields for every lead.

namespace layout {
inline constexpr const char* kForecastInfo = "forecast.info";
inline constexpr const char* kForecastIndex = "forecasts.index";
inline constexpr const char* kForecastManifest = "forecast.manifest";
}  // namespace layout

inline constexpr const char* kForecastVars[4] = {"SWH", "MWP", "MWD_SIN", "MWD_COS"};

struct ForecastInfo {
  std::string wind_source;
  std::size_t leads = 0;
  std::int64_t dt = 0;
  std::string model;
};

inline void write_forecast_series(const ForecastSeries& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestRecord> entries;
  for (std::size_t k = 0; k < s.leads.size(); ++k) {
    const WaveState& w = s.leads[k];
    const GridField* fields[4] = {&w.swh, &w.mwp, &w.mwd_sin, &w.mwd_cos};
    for (int v = 0; v < 4; ++v) {
      std::string name = "lead" + std::to_string(k + 1) + "_" + kForecastVars[v] + ".wgf";
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
      write_wgf(*fields[v], dir / name);
      entries.push_back(ManifestRecord{s.valid_time(k), kForecastVars[v], name});
    }
  }
  write_manifest(dir / layout::kForecastManifest, entries);
}

inline void write_forecasts(std::span<const ForecastSeries> all, const ForecastInfo& info,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string index;
  for (const auto& s : all) {
    const std::string sub = "init_" + time_tag(s.init);
    write_forecast_series(s, dir / sub);
    index += format_iso_time(s.init) + " " + sub + "\n";
  }
  write_text_file(dir / layout::kForecastIndex, index);
  write_text_file(dir / layout::kForecastInfo, "wind_source=" + info.wind_source + "\nleads=" +
                                                   std::to_string(info.leads) + "\ndt_seconds=" +
                                                   std::to_string(info.dt) + "\nmodel=" + info.model + "\n");
}

inline ForecastInfo read_forecast_info(const std::filesystem::path& dir) {
  const auto path = dir / layout::kForecastInfo;
  if (!std::filesystem::exists(path)) throw DataError("forecast directory " + dir.string() + " has no forecast.info");
  KvReader kv(parse_kv_lines(read_text_file(path), path.string()), path.string());
  ForecastInfo info;
  info.wind_source = kv.str("wind_source");
  info.leads = kv.count("leads");
  info.dt = static_cast<std::int64_t>(kv.count("dt_seconds"));
  info.model = kv.str("model");
  kv.finish();
  return info;
}

inline std::vector<ForecastSeries> read_forecasts(const std::filesystem::path& dir) {
  const ForecastInfo info = read_forecast_info(dir);
  const auto index_path = dir / layout::kForecastIndex;
  std::vector<ForecastSeries> out;
  std::istringstream lines(read_text_file(index_path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw FormatError(index_path.string() + ":" + std::to_string(lineno) + ": expected '<iso-time> <dir>'");
    ForecastSeries s;
    s.init = parse_iso_time(line.substr(0, sp));
    s.dt = info.dt;
    s.wind_source = info.wind_source;
    const FieldArchive archive(dir / line.substr(sp + 1) / layout::kForecastManifest);
    for (std::size_t k = 0; k < info.leads; ++k) {
      const std::int64_t t = s.valid_time(k);
      s.leads.push_back(WaveState{archive.load(t, "SWH"), archive.load(t, "MWP"), archive.load(t, "MWD_SIN"),
                                  archive.load(t, "MWD_COS")});
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("forecast index " + index_path.string() + " lists no forecasts");
  return out;
}

}  // namespace wavecast
