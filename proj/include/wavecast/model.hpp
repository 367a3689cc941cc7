#pragma once

#include <cstdint>
#include <string>

#include "wavecast/autodiff.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/grid.hpp"

namespace wavecast {

enum class ModelKind { ViT, ConvLSTM };

inline const char* model_kind_name(ModelKind k) { return k == ModelKind::ViT ? "vit" : "convlstm"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "vit") return ModelKind::ViT;
  if (s == "convlstm") return ModelKind::ConvLSTM;
  throw ConfigError("model must be 'vit' or 'convlstm', got '" + s + "'");
}

/// One-step forecaster: normalised inputs to the normalised state one dt ahead.
/// Both architectures share this contract so training and rollout treat them alike.
class Model {
 public:
  virtual ~Model() = default;
  virtual ModelKind kind() const = 0;
  virtual ParameterSet& params() = 0;
  virtual const ParameterSet& params() const = 0;
  virtual std::size_t t_in() const = 0;
  virtual std::size_t t_force() const = 0;
  /// Architecture hyperparameters as canonical key=value lines.
  virtual std::string describe() const = 0;
  /// waves [B, t_in, 4, H, W], winds [B, t_force, 2, H, W] -> [B, 4, H, W], land cells 0.
  virtual Var forward(Tape& tape, const ModelInput& input, const Terrain& terrain) = 0;
};

/// Ocean indicator as a [H, W] tensor (1 ocean, 0 land).
inline Tensor ocean_tensor(const LandMask& mask) {
  const auto& g = mask.geometry();
  Tensor t({g.lat_count, g.lon_count});
  for (std::size_t c = 0; c < mask.cells(); ++c) t[c] = mask.ocean(c) ? 1.0 : 0.0;
  return t;
}

inline void check_input(const ModelInput& in, std::size_t t_in, std::size_t t_force, const GridGeometry& g) {
  const Shape& w = in.waves.shape();
  const Shape& f = in.winds.shape();
  if (w.size() != 5 || w[1] != t_in || w[2] != 4 || w[3] != g.lat_count || w[4] != g.lon_count) {
    throw ShapeError("wave history must be [B, " + std::to_string(t_in) + ", 4, " + std::to_string(g.lat_count) +
                     ", " + std::to_string(g.lon_count) + "], got " + to_string(w));
  }
  if (f.size() != 5 || f[0] != w[0] || f[1] != t_force || f[2] != 2 || f[3] != g.lat_count || f[4] != g.lon_count) {
    throw ShapeError("wind forcing must be [" + std::to_string(w[0]) + ", " + std::to_string(t_force) + ", 2, " +
                     std::to_string(g.lat_count) + ", " + std::to_string(g.lon_count) + "], got " + to_string(f));
  }
}

}  // namespace wavecast
