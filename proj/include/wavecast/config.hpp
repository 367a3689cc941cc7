#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wavecast/convlstm.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/kv.hpp"
#include "wavecast/model.hpp"
#include "wavecast/synth.hpp"
#include "wavecast/training.hpp"
#include "wavecast/vit.hpp"

namespace wavecast {

struct ConfigKey {
  const char* name;
  const char* fallback;
  const char* doc;
};

// Every key the tools understand, in render order.
inline constexpr ConfigKey kConfigKeys[] = {
    // paths
    {"data", "", "dataset directory (synth output, train/rollout/evaluate input)"},
    {"out", "", "output directory"},
    {"checkpoint", "", "checkpoint file for rollout and case-study"},
    {"resume", "", "last.wckp to continue training from"},
    // synthetic world
    {"lat_count", "32", "grid rows"},
    {"lon_count", "64", "grid columns (periodic)"},
    {"n_steps", "2000", "time steps generated"},
    {"dt_hours", "24", "hours per step"},
    {"seed", "7", "run seed for the world, initialisation and shuffling"},
    {"alpha", "0.025", "equilibrium SWH coefficient, m per (m/s)^2"},
    {"lambda", "0.3", "relaxation rate per step, (0, 1]"},
    {"beta", "0.55", "MWP coefficient, s per m/s"},
    {"advection", "0.3", "fraction of the wind displacement used to advect SWH"},
    {"n_storms", "4", "simultaneous vortices"},
    {"storm_peak", "22", "vortex peak wind, m/s"},
    {"storm_radius", "10", "vortex radius, degrees"},
    {"background_speed", "8", "background jet speed, m/s"},
    {"land_fraction", "0.25", "fraction of land cells"},
    {"wind_noise_std", "3", "noise added to the degraded wind set, m/s"},
    {"history", "2", "wave steps before each sample init"},
    {"horizon", "7", "steps after each sample init"},
    {"train_ratio", "0.8", "chronological split ratio"},
    {"val_ratio", "0.1", "chronological split ratio"},
    {"test_ratio", "0.1", "chronological split ratio"},
    // model
    {"model", "vit", "vit or convlstm"},
    {"patch", "4", "patch edge"},
    {"d_model", "64", "token width"},
    {"n_heads", "4", "attention heads"},
    {"n_enc_blocks", "2", "encoder blocks"},
    {"n_dec_blocks", "2", "decoder blocks"},
    {"t_in", "2", "wave history steps per model step"},
    {"t_force", "1", "wind steps per model step"},
    {"conv_layers", "2", "3x3 layers in the output head"},
    {"mlp_ratio", "4", "MLP hidden width / d_model"},
    {"terrain", "1", "add the terrain encoding (0 or 1)"},
    {"residual", "0", "predict an increment over the last state (0 or 1)"},
    {"hidden", "32", "ConvLSTM hidden channels"},
    // training
    {"lr", "0.001", "Adam learning rate"},
    {"beta1", "0.9", "Adam first-moment decay"},
    {"beta2", "0.999", "Adam second-moment decay"},
    {"adam_eps", "1e-08", "Adam epsilon"},
    {"epochs", "10", "training epochs"},
    {"batch_size", "8", "samples per step"},
    {"clip_norm", "1", "global gradient norm clip, 0 disables"},
    {"weights", "1,1,1,1", "loss weights for swh,mwp,mwd_sin,mwd_cos"},
    {"max_train_samples", "0", "cap on training samples, 0 for all"},
    {"max_val_samples", "0", "cap on validation samples, 0 for all"},
    // rollout
    {"init", "test", "ISO init time, or a split name for all of its inits"},
    {"leads", "7", "rollout steps"},
    {"wind", "truth", "truth or file:<dir|manifest>"},
    {"rollout_batch", "8", "inits per forward pass"},
    // evaluation
    {"forecasts", "", "comma-separated label=dir forecast sets"},
    {"lat_weighted", "1", "cos-latitude weights in global scores (0 or 1)"},
    {"mre_threshold", "1", "MRE filter on true SWH, m"},
    {"ppm", "0", "also write PPM heatmaps (0 or 1)"},
    // case study
    {"window", "auto", "row,col,rows,cols or auto (centred on the peak true SWH)"},
    {"window_size", "12", "edge of the auto window, cells"},
};

/// Flat key=value run configuration. Unknown keys are errors; every key has a default.
class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : kConfigKeys) values_[k.name] = k.fallback;
  }

  static bool known(std::string_view key) {
    for (const auto& k : kConfigKeys)
      if (key == k.name) return true;
    return false;
  }

  static RunConfig parse(const std::string& text, const std::string& what = "config") {
    RunConfig c;
    for (const auto& [k, v] : parse_kv_lines(text, what)) c.set(k, v);
    return c;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const { return parse_double(get(key), key); }
  std::size_t count(const std::string& key) const { return parse_count(get(key), key); }
  bool flag(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError(key + " must be 0 or 1, got '" + v + "'");
  }

  std::string render() const {
    std::string out;
    for (const auto& k : kConfigKeys) out += std::string(k.name) + "=" + values_.at(k.name) + "\n";
    return out;
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  SynthConfig synth() const {
    SynthConfig s;
    s.lat_count = count("lat_count");
    s.lon_count = count("lon_count");
    s.n_steps = count("n_steps");
    s.dt_hours = real("dt_hours");
    s.seed = count("seed");
    s.alpha = real("alpha");
    s.lambda = real("lambda");
    s.beta = real("beta");
    s.advection = real("advection");
    s.n_storms = count("n_storms");
    s.storm_peak = real("storm_peak");
    s.storm_radius = real("storm_radius");
    s.background_speed = real("background_speed");
    s.land_fraction = real("land_fraction");
    s.wind_noise_std = real("wind_noise_std");
    s.history = count("history");
    s.horizon = count("horizon");
    s.train_ratio = real("train_ratio");
    s.val_ratio = real("val_ratio");
    s.test_ratio = real("test_ratio");
    s.validate();
    return s;
  }

  ViTConfig vit() const {
    ViTConfig v;
    v.patch = count("patch");
    v.d_model = count("d_model");
    v.n_heads = count("n_heads");
    v.n_enc_blocks = count("n_enc_blocks");
    v.n_dec_blocks = count("n_dec_blocks");
    v.t_in = count("t_in");
    v.t_force = count("t_force");
    v.conv_layers = count("conv_layers");
    v.mlp_ratio = count("mlp_ratio");
    v.terrain = flag("terrain");
    v.residual = flag("residual");
    return v;
  }

  ConvLSTMConfig convlstm() const {
    ConvLSTMConfig c;
    c.hidden = count("hidden");
    c.t_in = count("t_in");
    c.t_force = count("t_force");
    c.validate();
    return c;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.lr = real("lr");
    t.beta1 = real("beta1");
    t.beta2 = real("beta2");
    t.eps = real("adam_eps");
    t.epochs = count("epochs");
    t.batch_size = count("batch_size");
    t.clip_norm = real("clip_norm");
    t.seed = count("seed");
    t.max_train_samples = count("max_train_samples");
    t.max_val_samples = count("max_val_samples");
    const std::string& w = get("weights");
    std::size_t start = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t end = w.find(',', start);
      if ((i < 3) == (end == std::string::npos)) throw ConfigError("weights needs four comma-separated values");
      t.weights[i] = parse_double(w.substr(start, end == std::string::npos ? std::string::npos : end - start), "weights");
      start = end + 1;
    }
    t.validate();
    return t;
  }

  ModelKind model_kind() const { return parse_model_kind(get("model")); }

  std::unique_ptr<Model> make_model(const GridGeometry& g) const {
    if (model_kind() == ModelKind::ViT) return std::make_unique<ViTModel>(vit(), g, count("seed"));
    return std::make_unique<ConvLSTMModel>(convlstm(), g, count("seed"));
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Reference text for every key, for --help.
inline std::string describe_config_keys() {
  std::string out;
  for (const auto& k : kConfigKeys) {
    out += "  --" + std::string(k.name) + " (default '" + k.fallback + "'): " + k.doc + "\n";
  }
  return out;
}

}  // namespace wavecast
