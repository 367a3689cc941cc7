#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wavecast/errors.hpp"
#include "wavecast/grid.hpp"
#include "wavecast/kv.hpp"
#include "wavecast/tensor.hpp"
#include "wavecast/wgf.hpp"

namespace wavecast {

/// On-disk layout of a dataset directory. Manifest paths are relative to the
/// directory holding the manifest.
namespace layout {
inline constexpr const char* kDatasetManifest = "dataset.manifest";
inline constexpr const char* kManifestSuffix = ".manifest";
inline constexpr const char* kSamplesSuffix = ".samples";
inline constexpr const char* kNormStats = "norm_stats.txt";
inline constexpr const char* kInfoFile = "dataset.info";
inline constexpr const char* kDepthFile = "static/depth.wgf";
inline constexpr const char* kClimSwhFile = "climatology/swh.wgf";
inline constexpr const char* kClimMwpFile = "climatology/mwp.wgf";
inline constexpr const char* kFieldsDir = "fields";
inline constexpr const char* kDegradedDir = "winds_degraded";
inline constexpr const char* kWindsManifest = "winds.manifest";
}  // namespace layout

inline std::string render_norm_stats(const NormStats& s) {
  std::string out;
  const std::pair<const char*, Moments> all[] = {{"swh", s.swh}, {"mwp", s.mwp}, {"u10", s.u10}, {"v10", s.v10}};
  for (const auto& [name, m] : all) {
    out += std::string(name) + "_mean=" + format_double(m.mean) + "\n";
    out += std::string(name) + "_std=" + format_double(m.std) + "\n";
  }
  return out;
}

inline NormStats parse_norm_stats(const std::string& text, const std::string& what = "norm stats") {
  KvReader kv(parse_kv_lines(text, what), what);
  NormStats s;
  std::pair<const char*, Moments*> all[] = {{"swh", &s.swh}, {"mwp", &s.mwp}, {"u10", &s.u10}, {"v10", &s.v10}};
  try {
    for (auto& [name, m] : all) {
      m->mean = kv.real(std::string(name) + "_mean");
      m->std = kv.real(std::string(name) + "_std");
    }
  } catch (const ConfigError& e) {
    throw FormatError(what + ": " + e.what());
  }
  kv.finish();
  s.validate();
  return s;
}

struct DatasetInfo {
  std::size_t lat_count = 0;
  std::size_t lon_count = 0;
  std::int64_t dt_seconds = 86400;
  std::size_t history = 2;
  std::size_t horizon = 7;
  std::size_t n_steps = 0;
  std::uint64_t seed = 0;
};

inline std::string render_dataset_info(const DatasetInfo& d) {
  return "lat_count=" + std::to_string(d.lat_count) + "\nlon_count=" + std::to_string(d.lon_count) +
         "\ndt_seconds=" + std::to_string(d.dt_seconds) + "\nhistory=" + std::to_string(d.history) +
         "\nhorizon=" + std::to_string(d.horizon) + "\nn_steps=" + std::to_string(d.n_steps) +
         "\nseed=" + std::to_string(d.seed) + "\n";
}

inline DatasetInfo parse_dataset_info(const std::string& text, const std::string& what = "dataset info") {
  KvReader kv(parse_kv_lines(text, what), what);
  DatasetInfo d;
  d.lat_count = kv.count("lat_count");
  d.lon_count = kv.count("lon_count");
  d.dt_seconds = static_cast<std::int64_t>(kv.count("dt_seconds"));
  d.history = kv.count("history");
  d.horizon = kv.count("horizon");
  d.n_steps = kv.count("n_steps");
  d.seed = kv.count("seed");
  kv.finish();
  if (d.dt_seconds <= 0) throw FormatError(what + ": dt_seconds must be positive");
  return d;
}

/// Fields addressed by (time, variable) through a manifest, loaded on demand.
class FieldArchive {
 public:
  FieldArchive() = default;

  explicit FieldArchive(const std::filesystem::path& manifest) : base_(manifest.parent_path()), what_(manifest.string()) {
    for (const auto& r : read_manifest(manifest)) index_[{r.time, r.variable}] = r.path;
  }

  bool has(std::int64_t time, const std::string& var) const { return index_.count({time, var}) != 0; }

  GridField load(std::int64_t time, const std::string& var) const {
    auto it = index_.find({time, var});
    if (it == index_.end()) {
      throw DataError("no " + var + " field for " + format_iso_time(time) + " in " + what_);
    }
    GridField f = read_wgf(base_ / it->second);
    if (f.valid_time != time) {
      throw DataError(it->second + ": valid time " + format_iso_time(f.valid_time) + " does not match manifest time " +
                      format_iso_time(time));
    }
    return f;
  }

  std::vector<std::int64_t> times(const std::string& var) const {
    std::vector<std::int64_t> out;
    for (const auto& [key, path] : index_) {
      if (key.second == var) out.push_back(key.first);
    }
    return out;
  }

  const std::string& source() const { return what_; }

 private:
  std::filesystem::path base_;
  std::string what_;
  std::map<std::pair<std::int64_t, std::string>, std::string> index_;
};

/// Static inputs shared by every sample.
struct Terrain {
  GridField depth;
  LandMask mask;
};

/// Normalised wind forcing for a valid time, [2, H, W].
class WindSource {
 public:
  virtual ~WindSource() = default;
  virtual Tensor wind(std::int64_t time) const = 0;
  virtual std::string tag() const = 0;
};

/// Winds read from a manifest of U10/V10 fields (truth or an alternative forecast).
class ArchiveWinds : public WindSource {
 public:
  ArchiveWinds(FieldArchive archive, NormStats stats, GridGeometry geom, std::string tag)
      : archive_(std::move(archive)), stats_(stats), geom_(geom), tag_(std::move(tag)) {}

  Tensor wind(std::int64_t time) const override {
    if (auto it = cache_.find(time); it != cache_.end()) return it->second;
    if (!archive_.has(time, "U10") || !archive_.has(time, "V10")) {
      throw DataError("wind source '" + tag_ + "' has no forcing for " + format_iso_time(time));
    }
    const GridField u = archive_.load(time, "U10"), v = archive_.load(time, "V10");
    require_same_geometry(u.geom, geom_, "wind field " + format_iso_time(time));
    Tensor t = normalize_wind(u, v, stats_);
    cache_.emplace(time, t);
    return t;
  }

  std::string tag() const override { return tag_; }

 private:
  FieldArchive archive_;
  NormStats stats_;
  GridGeometry geom_;
  std::string tag_;
  mutable std::map<std::int64_t, Tensor> cache_;
};

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

/// A generated (or converted) dataset directory opened for reading.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset directory " + root.string() + " does not exist");
    Dataset d;
    d.root_ = root;
    d.info_ = parse_dataset_info(read_text_file(root / layout::kInfoFile), (root / layout::kInfoFile).string());
    d.stats_ = parse_norm_stats(read_text_file(root / layout::kNormStats), (root / layout::kNormStats).string());
    d.archive_ = FieldArchive(root / layout::kDatasetManifest);
    GridField depth = d.archive_.load(kStaticTime, "DEPTH");
    depth.validate();
    LandMask mask = derive_mask(depth);
    d.terrain_ = std::make_shared<Terrain>(Terrain{std::move(depth), std::move(mask)});
    if (d.archive_.has(kStaticTime, "CLIM_SWH")) d.clim_swh_ = d.archive_.load(kStaticTime, "CLIM_SWH");
    if (d.archive_.has(kStaticTime, "CLIM_MWP")) d.clim_mwp_ = d.archive_.load(kStaticTime, "CLIM_MWP");
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
      const fs::path p = root / (std::string(split_name(s)) + layout::kSamplesSuffix);
      std::vector<std::int64_t> inits;
      if (fs::exists(p)) {
        std::istringstream in(read_text_file(p));
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty() || line[0] == '#') continue;
          try {
            inits.push_back(parse_iso_time(line));
          } catch (const DataError& e) {
            throw FormatError(p.string() + ": " + e.what());
          }
        }
      }
      d.samples_[static_cast<int>(s)] = std::move(inits);
    }
    d.truth_winds_ = std::make_shared<ArchiveWinds>(d.archive_, d.stats_, d.geometry(), "truth");
    return d;
  }

  const std::filesystem::path& root() const { return root_; }
  const DatasetInfo& info() const { return info_; }
  const NormStats& stats() const { return stats_; }
  const Terrain& terrain() const { return *terrain_; }
  const LandMask& mask() const { return terrain_->mask; }
  const GridGeometry& geometry() const { return terrain_->depth.geom; }
  std::int64_t dt() const { return info_.dt_seconds; }
  const std::vector<std::int64_t>& samples(Split s) const { return samples_[static_cast<int>(s)]; }
  const FieldArchive& archive() const { return archive_; }
  const WindSource& truth_winds() const { return *truth_winds_; }

  const GridField& climatology(VarId var) const {
    const auto& c = var == VarId::SWH ? clim_swh_ : clim_mwp_;
    if (!c) throw DataError("dataset " + root_.string() + " has no " + var_name(var) + " climatology");
    return *c;
  }

  /// Physical wave state at a valid time (direction as sin/cos).
  WaveState wave(std::int64_t time) const {
    WaveState w;
    w.swh = archive_.load(time, "SWH");
    w.mwp = archive_.load(time, "MWP");
    const GridField mwd = archive_.load(time, "MWD");
    for (const GridField* f : std::initializer_list<const GridField*>{&w.swh, &w.mwp, &mwd}) {
      require_same_geometry(f->geom, geometry(), "field " + format_iso_time(time));
    }
    std::tie(w.mwd_sin, w.mwd_cos) = encode_direction(mwd);
    return w;
  }

  /// Normalised, land-zeroed [4, H, W].
  const Tensor& wave_tensor(std::int64_t time) const {
    if (auto it = wave_tensors_.find(time); it != wave_tensors_.end()) return it->second;
    return wave_tensors_.emplace(time, normalize(wave(time), stats_, mask())).first->second;
  }

  void drop_cache() const { wave_tensors_.clear(); }

 private:
  std::filesystem::path root_;
  DatasetInfo info_;
  NormStats stats_;
  FieldArchive archive_;
  std::shared_ptr<Terrain> terrain_;
  std::optional<GridField> clim_swh_, clim_mwp_;
  std::vector<std::int64_t> samples_[3];
  std::shared_ptr<ArchiveWinds> truth_winds_;
  mutable std::map<std::int64_t, Tensor> wave_tensors_;
};

/// Winds from a `file:<path>` source: a directory holding winds.manifest or a manifest file.
inline std::unique_ptr<WindSource> open_wind_source(const std::string& spec, const Dataset& data) {
  if (spec == "truth") return std::make_unique<ArchiveWinds>(data.archive(), data.stats(), data.geometry(), "truth");
  if (spec.rfind("file:", 0) != 0) throw ConfigError("wind source must be 'truth' or 'file:<path>', got '" + spec + "'");
  std::filesystem::path p = spec.substr(5);
  if (std::filesystem::is_directory(p)) p /= layout::kWindsManifest;
  if (!std::filesystem::exists(p)) throw DataError("wind manifest " + p.string() + " does not exist");
  return std::make_unique<ArchiveWinds>(FieldArchive(p), data.stats(), data.geometry(), spec);
}

/// One model step's inputs, batched: waves [B, t_in, 4, H, W], winds [B, t_force, 2, H, W].
struct ModelInput {
  Tensor waves;
  Tensor winds;
};

/// Stacks equally-shaped tensors along a new leading axis.
inline Tensor stack(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  Shape shape = parts[0]->shape();
  std::vector<double> data;
  data.reserve(parts.size() * parts[0]->size());
  for (const Tensor* t : parts) {
    if (t->shape() != shape) throw ShapeError("stack: " + to_string(t->shape()) + " vs " + to_string(shape));
    data.insert(data.end(), t->storage().begin(), t->storage().end());
  }
  shape.insert(shape.begin(), parts.size());
  return Tensor(std::move(shape), std::move(data));
}

/// Times of the wave history and wind forcing for a step that starts at `init`
/// and predicts init + dt.
inline std::vector<std::int64_t> history_times(std::int64_t init, std::size_t t_in, std::int64_t dt) {
  std::vector<std::int64_t> out;
  for (std::size_t k = 0; k < t_in; ++k) out.push_back(init - static_cast<std::int64_t>(t_in - 1 - k) * dt);
  return out;
}

inline std::vector<std::int64_t> forcing_times(std::int64_t init, std::size_t t_force, std::int64_t dt) {
  std::vector<std::int64_t> out;
  for (std::size_t k = 0; k < t_force; ++k) out.push_back(init + dt - static_cast<std::int64_t>(t_force - 1 - k) * dt);
  return out;
}

/// Assembles a batch of single-step inputs from the truth archive.
inline ModelInput assemble_input(const Dataset& data, std::span<const std::int64_t> inits, std::size_t t_in,
                                 std::size_t t_force, const WindSource& winds) {
  std::vector<Tensor> waves, forcing;
  std::vector<const Tensor*> wp, fp;
  for (std::int64_t init : inits) {
    std::vector<const Tensor*> hist;
    for (std::int64_t t : history_times(init, t_in, data.dt())) hist.push_back(&data.wave_tensor(t));
    waves.push_back(stack(hist));
    std::vector<Tensor> w;
    for (std::int64_t t : forcing_times(init, t_force, data.dt())) w.push_back(winds.wind(t));
    std::vector<const Tensor*> wptr;
    for (const auto& t : w) wptr.push_back(&t);
    forcing.push_back(stack(wptr));
  }
  for (const auto& t : waves) wp.push_back(&t);
  for (const auto& t : forcing) fp.push_back(&t);
  return ModelInput{stack(wp), stack(fp)};
}

/// Normalised truth at init + dt for each init, [B, 4, H, W].
inline Tensor assemble_target(const Dataset& data, std::span<const std::int64_t> inits) {
  std::vector<const Tensor*> parts;
  for (std::int64_t init : inits) parts.push_back(&data.wave_tensor(init + data.dt()));
  return stack(parts);
}

}  // namespace wavecast
