#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "wavecast/autodiff.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/model.hpp"
#include "wavecast/rng.hpp"

namespace wavecast {

struct ConvLSTMConfig {
  std::size_t hidden = 32;
  std::size_t t_in = 2;
  std::size_t t_force = 1;

  void validate() const {
    if (hidden == 0 || t_in == 0 || t_force == 0) throw ConfigError("hidden, t_in and t_force must be >= 1");
  }

  std::size_t input_channels() const { return 4 + 2 * t_force; }

  std::string render() const {
    return "hidden=" + std::to_string(hidden) + "\nt_in=" + std::to_string(t_in) +
           "\nt_force=" + std::to_string(t_force) + "\n";
  }
};

struct RecurrentState {
  Var hidden;
  Var cell;
};

struct ConvLSTMWeights {
  Var wx;    // [4*hid, C_in, 3, 3]
  Var wh;    // [4*hid, hid, 3, 3]
  Var bias;  // [4*hid, 1, 1]
};

/// One cell update. x [B, C_in, H, W]; gates ordered (input, forget, output, candidate).
/// A missing state means zero hidden and cell.
inline RecurrentState cell_step(Var x, const std::optional<RecurrentState>& state, const ConvLSTMWeights& w) {
  Var gates = conv2d(x, w.wx);
  if (state) gates = gates + conv2d(state->hidden, w.wh);
  gates = gates + w.bias;
  const std::size_t hid = w.wh.shape()[1];
  Var i = sigmoid(slice(gates, 1, 0, hid));
  Var f = sigmoid(slice(gates, 1, hid, 2 * hid));
  Var o = sigmoid(slice(gates, 1, 2 * hid, 3 * hid));
  Var g = tanh(slice(gates, 1, 3 * hid, 4 * hid));
  Var c = state ? f * state->cell + i * g : i * g;
  return RecurrentState{o * tanh(c), c};
}

class ConvLSTMModel : public Model {
 public:
  ConvLSTMModel(ConvLSTMConfig cfg, GridGeometry geom, std::uint64_t seed) : cfg_(cfg), geom_(geom) {
    cfg_.validate();
    CounterRng rng = CounterRng(seed).substream(0x4c53544dULL);
    const std::size_t h = cfg_.hidden, cin = cfg_.input_channels();
    params_.add("lstm.wx", glorot_uniform({4 * h, cin, 3, 3}, 9 * cin, 9 * h, rng));
    params_.add("lstm.wh", glorot_uniform({4 * h, h, 3, 3}, 9 * h, 9 * h, rng));
    Tensor bias({4 * h, 1, 1}, 0.0);
    for (std::size_t k = h; k < 2 * h; ++k) bias[k] = 1.0;  // forget gate starts open
    params_.add("lstm.bias", std::move(bias));
    params_.add("proj.w", glorot_uniform({4, h, 3, 3}, 9 * h, 36, rng));
  }

  ModelKind kind() const override { return ModelKind::ConvLSTM; }
  ParameterSet& params() override { return params_; }
  const ParameterSet& params() const override { return params_; }
  std::size_t t_in() const override { return cfg_.t_in; }
  std::size_t t_force() const override { return cfg_.t_force; }
  const ConvLSTMConfig& config() const { return cfg_; }
  std::string describe() const override { return "model=convlstm\n" + cfg_.render(); }

  /// History steps see [wave; zero wind], the final step [last wave; forcing winds].
  Var forward(Tape& tape, const ModelInput& in, const Terrain& terrain) override {
    check_input(in, cfg_.t_in, cfg_.t_force, geom_);
    require_same_geometry(terrain.depth.geom, geom_, "terrain");
    const ConvLSTMWeights w{tape.param(*params_.find("lstm.wx")), tape.param(*params_.find("lstm.wh")),
                            tape.param(*params_.find("lstm.bias"))};
    const std::size_t b = in.waves.dim(0), hh = geom_.lat_count, ww = geom_.lon_count;
    Var waves = tape.constant(in.waves);
    Var zero_wind = tape.constant(Tensor({b, 2 * cfg_.t_force, hh, ww}, 0.0));
    Var forcing = reshape(tape.constant(in.winds), {b, 2 * cfg_.t_force, hh, ww});
    std::optional<RecurrentState> state;
    Var last;
    for (std::size_t t = 0; t < cfg_.t_in; ++t) {
      last = reshape(slice(waves, 1, t, t + 1), {b, 4, hh, ww});
      const Var parts[] = {last, zero_wind};
      state = cell_step(concat(parts, 1), state, w);
    }
    const Var parts[] = {last, forcing};
    state = cell_step(concat(parts, 1), state, w);
    Var out = conv2d(state->hidden, tape.param(*params_.find("proj.w")));
    return out * tape.constant(ocean_tensor(terrain.mask));
  }

 private:
  ConvLSTMConfig cfg_;
  GridGeometry geom_;
  ParameterSet params_;
};

}  // namespace wavecast
