#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wavecast/autodiff.hpp"
#include "wavecast/convlstm.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/kv.hpp"
#include "wavecast/model.hpp"
#include "wavecast/rng.hpp"
#include "wavecast/vit.hpp"
#include "wavecast/wgf.hpp"

namespace wavecast {

// ---------------------------------------------------------------------------
// Loss

struct LossParts {
  std::array<double, 4> channel{};  // unweighted masked MSE per channel
  double total = 0.0;
};

/// Sum over channels of w_c * mean over ocean cells (and batch) of (pred - truth)^2.
/// Land cells contribute nothing, gradients included. pred/truth are [4, H, W] or [B, 4, H, W].
inline Var masked_loss(Var pred, const Tensor& truth, const LandMask& mask, const std::array<double, 4>& weights,
                       LossParts* parts = nullptr) {
  const Tensor& pv = pred.value();
  if (pv.shape() != truth.shape()) {
    throw ShapeError("loss operands differ: " + to_string(pv.shape()) + " vs " + to_string(truth.shape()));
  }
  const std::size_t cells = mask.cells();
  if (pv.rank() < 3 || pv.dim(pv.rank() - 3) != 4 || pv.size() % (4 * cells) != 0) {
    throw ShapeError("loss expects [.., 4, H, W] on " + mask.geometry().describe() + ", got " + to_string(pv.shape()));
  }
  if (mask.ocean_count() == 0) throw DomainError("masked loss over an all-land mask");
  const std::size_t batch = pv.size() / (4 * cells);
  const double denom = static_cast<double>(batch * mask.ocean_count());
  LossParts lp;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < 4; ++c) {
      const std::size_t base = (b * 4 + c) * cells;
      double acc = 0.0;
      for (std::size_t k = 0; k < cells; ++k) {
        if (!mask.ocean(k)) continue;
        const double d = pv[base + k] - truth[base + k];
        acc += d * d;
      }
      lp.channel[c] += acc;
    }
  for (std::size_t c = 0; c < 4; ++c) {
    lp.channel[c] /= denom;
    lp.total += weights[c] * lp.channel[c];
  }
  if (parts) *parts = lp;
  const std::size_t idp = pred.id();
  auto target = std::make_shared<Tensor>(truth);
  const LandMask m = mask;
  return pred.tape()->record(Tensor::scalar(lp.total), {idp}, [=](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    const auto& p = t.value(idp);
    auto& gp = t.grad_of(idp);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < 4; ++c) {
        const std::size_t base = (b * 4 + c) * cells;
        const double scale = 2.0 * weights[c] * g / denom;
        for (std::size_t k = 0; k < cells; ++k) {
          if (m.ocean(k)) gp[base + k] += scale * (p[base + k] - (*target)[base + k]);
        }
      }
  });
}

// ---------------------------------------------------------------------------
// Optimiser

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double clip_norm = 1.0;  // global gradient norm; 0 disables
  std::uint64_t seed = 7;
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};
  std::size_t max_train_samples = 0;  // 0 uses the whole split
  std::size_t max_val_samples = 0;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("adam eps must be > 0");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError("channel weights must be >= 0");
    }
  }

  std::string render() const {
    return "lr=" + format_double(lr) + "\nbeta1=" + format_double(beta1) + "\nbeta2=" + format_double(beta2) +
           "\neps=" + format_double(eps) + "\nepochs=" + std::to_string(epochs) + "\nbatch_size=" +
           std::to_string(batch_size) + "\nclip_norm=" + format_double(clip_norm) + "\nseed=" + std::to_string(seed) +
           "\nweights=" + format_double(weights[0]) + "," + format_double(weights[1]) + "," + format_double(weights[2]) +
           "," + format_double(weights[3]) + "\nmax_train_samples=" + std::to_string(max_train_samples) +
           "\nmax_val_samples=" + std::to_string(max_val_samples) + "\n";
  }
};

struct AdamMoments {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline AdamMoments zero_moments(const ParameterSet& params) {
  AdamMoments a;
  for (const auto& p : params) {
    a.m.push_back(Tensor::zeros_like(p.value));
    a.v.push_back(Tensor::zeros_like(p.value));
  }
  return a;
}

/// Global-norm clipping followed by a bias-corrected Adam update at step t >= 1.
/// Returns the gradient norm before clipping. Non-finite gradients abort the step untouched.
inline double adam_step(ParameterSet& params, AdamMoments& moments, const TrainConfig& cfg, std::size_t t) {
  if (t == 0) throw ContractError("adam step counter starts at 1");
  if (moments.m.size() != params.size() || moments.v.size() != params.size()) {
    throw ContractError("optimizer moments do not match the parameter set");
  }
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.grad.all_finite()) throw DomainError("non-finite gradient in parameter '" + p.name + "'");
    for (double g : p.grad.storage()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double scale = cfg.clip_norm > 0.0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    auto& m = moments.m[i].storage();
    auto& v = moments.v[i].storage();
    auto& x = p.value.storage();
    const auto& gr = p.grad.storage();
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double g = gr[k] * scale;
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      x[k] -= cfg.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Model construction from its description

inline ViTConfig parse_vit_config(KvReader& kv) {
  ViTConfig c;
  c.patch = kv.count("patch");
  c.d_model = kv.count("d_model");
  c.n_heads = kv.count("n_heads");
  c.n_enc_blocks = kv.count("n_enc_blocks");
  c.n_dec_blocks = kv.count("n_dec_blocks");
  c.t_in = kv.count("t_in");
  c.t_force = kv.count("t_force");
  c.conv_layers = kv.count("conv_layers");
  c.mlp_ratio = kv.count("mlp_ratio");
  c.terrain = kv.count("terrain") != 0;
  c.residual = kv.count("residual") != 0;
  return c;
}

inline ConvLSTMConfig parse_convlstm_config(KvReader& kv) {
  ConvLSTMConfig c;
  c.hidden = kv.count("hidden");
  c.t_in = kv.count("t_in");
  c.t_force = kv.count("t_force");
  return c;
}

/// Rebuilds a model (fresh weights from `seed`) from Model::describe() text.
inline std::unique_ptr<Model> model_from_description(const std::string& text, const GridGeometry& geom,
                                                     std::uint64_t seed) {
  KvReader kv(parse_kv_lines(text, "model description"), "model description");
  const ModelKind kind = parse_model_kind(kv.str("model"));
  std::unique_ptr<Model> m;
  if (kind == ModelKind::ViT) {
    m = std::make_unique<ViTModel>(parse_vit_config(kv), geom, seed);
  } else {
    m = std::make_unique<ConvLSTMModel>(parse_convlstm_config(kv), geom, seed);
  }
  kv.finish();
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::array<char, 4> kCheckpointMagic{'W', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainState {
  std::size_t epoch = 0;  // completed epochs
  std::size_t step = 0;   // optimizer steps taken
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  CounterRng::State rng{};
  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct Checkpoint {
  std::string model_text;
  std::string train_text;
  GridGeometry geom;
  NormStats stats;
  std::vector<std::pair<std::string, Tensor>> tensors;
  AdamMoments moments;
  TrainState state;
};

namespace detail {

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void put_tensor(ByteWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u64(d);
  for (double v : t.storage()) w.f64(v);
}

template <typename R>
Tensor get_tensor(R& r) {
  const std::uint32_t rank = r.u32();
  if (rank > 8) r.fail("tensor rank " + std::to_string(rank) + " out of range", r.offset() - 4);
  Shape s(rank);
  std::size_t n = 1;
  for (auto& d : s) {
    d = static_cast<std::size_t>(r.u64());
    if (d == 0 || d > (std::size_t{1} << 32)) r.fail("bad tensor extent", r.offset() - 8);
    n *= d;
  }
  r.need(n * 8);
  std::vector<double> data(n);
  for (auto& v : data) v = r.f64();
  return Tensor(std::move(s), std::move(data));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic.data(), 4);
  w.u32(kCheckpointVersion);
  w.str(c.model_text);
  w.str(c.train_text);
  w.u64(c.geom.lat_count);
  w.u64(c.geom.lon_count);
  w.f64(c.geom.lat0);
  w.f64(c.geom.dlat);
  w.f64(c.geom.lon0);
  w.f64(c.geom.dlon);
  for (const Moments& m : {c.stats.swh, c.stats.mwp, c.stats.u10, c.stats.v10}) {
    w.f64(m.mean);
    w.f64(m.std);
  }
  w.u64(c.state.epoch);
  w.u64(c.state.step);
  w.f64(c.state.best_val);
  w.u64(c.state.best_epoch);
  w.u64(c.state.rng.seed);
  w.u64(c.state.rng.stream);
  w.u64(c.state.rng.counter);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    w.str(name);
    detail::put_tensor(w, t);
  }
  w.u32(static_cast<std::uint32_t>(c.moments.m.size()));
  for (std::size_t i = 0; i < c.moments.m.size(); ++i) {
    detail::put_tensor(w, c.moments.m[i]);
    detail::put_tensor(w, c.moments.v[i]);
  }
  w.u64(detail::fnv1a(w.bytes()));
  return std::move(w.bytes());
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& what = "checkpoint") {
  detail::ByteReader<FormatError> r(bytes, what);
  r.need(8);
  if (!std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
    r.fail("bad magic (expected WCKP)", 0);
  }
  r.skip(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version), 4);
  }
  if (bytes.size() < 16) r.fail("truncated checkpoint", bytes.size());
  const std::uint64_t stored = std::bit_cast<std::uint64_t>(
      std::array<std::uint8_t, 8>{bytes[bytes.size() - 8], bytes[bytes.size() - 7], bytes[bytes.size() - 6],
                                  bytes[bytes.size() - 5], bytes[bytes.size() - 4], bytes[bytes.size() - 3],
                                  bytes[bytes.size() - 2], bytes[bytes.size() - 1]});
  if (stored != detail::fnv1a(bytes.first(bytes.size() - 8))) {
    r.fail("checksum mismatch (corrupt or truncated payload)", bytes.size() - 8);
  }
  detail::ByteReader<FormatError> body(bytes.first(bytes.size() - 8), what);
  body.skip(8);
  Checkpoint c;
  c.model_text = body.str();
  c.train_text = body.str();
  c.geom.lat_count = static_cast<std::size_t>(body.u64());
  c.geom.lon_count = static_cast<std::size_t>(body.u64());
  c.geom.lat0 = body.f64();
  c.geom.dlat = body.f64();
  c.geom.lon0 = body.f64();
  c.geom.dlon = body.f64();
  for (Moments* m : {&c.stats.swh, &c.stats.mwp, &c.stats.u10, &c.stats.v10}) {
    m->mean = body.f64();
    m->std = body.f64();
  }
  c.state.epoch = static_cast<std::size_t>(body.u64());
  c.state.step = static_cast<std::size_t>(body.u64());
  c.state.best_val = body.f64();
  c.state.best_epoch = static_cast<std::size_t>(body.u64());
  c.state.rng.seed = body.u64();
  c.state.rng.stream = body.u64();
  c.state.rng.counter = body.u64();
  const std::uint32_t count = body.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = body.str();
    c.tensors.emplace_back(std::move(name), detail::get_tensor(body));
  }
  const std::uint32_t moments = body.u32();
  for (std::uint32_t i = 0; i < moments; ++i) {
    c.moments.m.push_back(detail::get_tensor(body));
    c.moments.v.push_back(detail::get_tensor(body));
  }
  if (body.remaining() != 0) body.fail("trailing bytes after checkpoint payload", body.offset());
  try {
    c.geom.validate();
  } catch (const ShapeError& e) {
    throw FormatError(what + ": " + e.what());
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

inline Checkpoint make_checkpoint(const Model& model, const TrainConfig& cfg, const GridGeometry& geom,
                                  const NormStats& stats, const AdamMoments& moments, const TrainState& state) {
  Checkpoint c;
  c.model_text = model.describe();
  c.train_text = cfg.render();
  c.geom = geom;
  c.stats = stats;
  for (const auto& p : model.params()) c.tensors.emplace_back(p.name, p.value);
  c.moments = moments;
  c.state = state;
  return c;
}

/// Copies checkpoint weights into `model`. The architecture must match exactly.
inline void restore_weights(Model& model, const Checkpoint& c) {
  if (c.model_text != model.describe()) {
    KvReader kv(parse_kv_lines(c.model_text, "checkpoint model"), "checkpoint model");
    throw ConfigConflictError("checkpoint holds a " + kv.str("model") + " model (" + c.model_text +
                              ") but the configuration selects " + model.describe());
  }
  if (c.tensors.size() != model.params().size()) throw FormatError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    Parameter& p = model.params()[i];
    if (c.tensors[i].first != p.name || c.tensors[i].second.shape() != p.value.shape()) {
      throw FormatError("checkpoint tensor '" + c.tensors[i].first + "' does not match parameter '" + p.name + "'");
    }
    p.value = c.tensors[i].second;
  }
}

/// Model rebuilt from a checkpoint, weights restored.
inline std::unique_ptr<Model> load_model(const Checkpoint& c) {
  auto m = model_from_description(c.model_text, c.geom, 0);
  restore_weights(*m, c);
  return m;
}

// ---------------------------------------------------------------------------
// Training loop

/// Normalised prediction without gradient tracking.
inline Tensor predict(Model& model, const ModelInput& in, const Terrain& terrain) {
  Tape tape(false);
  return model.forward(tape, in, terrain).value();
}

struct ValidationScore {
  LossParts loss;
  double swh_rmse_m = 0.0;  // lead-1 masked SWH RMSE in metres
};

inline ValidationScore validate_model(Model& model, const Dataset& data, std::span<const std::int64_t> inits,
                                      const TrainConfig& cfg) {
  if (inits.empty()) throw ConfigError("validation split is empty");
  ValidationScore s;
  double sq = 0.0, n = 0.0;
  const LandMask& mask = data.mask();
  const std::size_t cells = mask.cells();
  std::array<double, 4> sums{};
  for (std::size_t b = 0; b < inits.size(); b += cfg.batch_size) {
    const auto batch = inits.subspan(b, std::min(cfg.batch_size, inits.size() - b));
    const ModelInput in = assemble_input(data, batch, model.t_in(), model.t_force(), data.truth_winds());
    const Tensor truth = assemble_target(data, batch);
    const Tensor pred = predict(model, in, data.terrain());
    Tape tape(false);
    LossParts parts;
    masked_loss(tape.constant(pred), truth, mask, cfg.weights, &parts);
    for (std::size_t c = 0; c < 4; ++c) sums[c] += parts.channel[c] * static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t k = 0; k < cells; ++k) {
        if (!mask.ocean(k)) continue;
        const double d = (pred[i * 4 * cells + k] - truth[i * 4 * cells + k]) * data.stats().swh.std;
        sq += d * d;
        n += 1.0;
      }
  }
  for (std::size_t c = 0; c < 4; ++c) {
    s.loss.channel[c] = sums[c] / static_cast<double>(inits.size());
    s.loss.total += cfg.weights[c] * s.loss.channel[c];
  }
  s.swh_rmse_m = std::sqrt(sq / n);
  return s;
}

struct TrainResult {
  std::filesystem::path best;
  std::filesystem::path last;
  TrainState state;
  double initial_train_loss = 0.0;
};

inline constexpr const char* kLossCsvHeader = "epoch,step,split,total,swh,mwp,mwd_sin,mwd_cos,swh_rmse_m\n";

/// Trains `model` on the dataset's train split, writing last.wckp every epoch,
/// best.wckp on validation improvement, and loss.csv. With `resume`, continues
/// from a last.wckp written by an identically configured run.
inline TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg, const std::filesystem::path& out,
                         const std::optional<std::filesystem::path>& resume = std::nullopt,
                         const std::function<void(const std::string&)>& log = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  std::vector<std::int64_t> train_inits = data.samples(Split::Train);
  std::vector<std::int64_t> val_inits = data.samples(Split::Val);
  if (train_inits.empty()) throw ConfigError("training manifest " + (data.root() / "train.samples").string() + " is empty");
  if (cfg.max_train_samples && train_inits.size() > cfg.max_train_samples) train_inits.resize(cfg.max_train_samples);
  if (cfg.max_val_samples && val_inits.size() > cfg.max_val_samples) val_inits.resize(cfg.max_val_samples);
  if (val_inits.empty()) val_inits = train_inits;  // degenerate split: select on training data

  fs::create_directories(out);
  TrainResult result;
  result.best = out / "best.wckp";
  result.last = out / "last.wckp";
  AdamMoments moments = zero_moments(model.params());
  TrainState state;
  state.rng = CounterRng(cfg.seed).substream(0x5348554646ULL).state();
  const fs::path csv_path = out / "loss.csv";
  std::string csv;

  if (resume) {
    const Checkpoint c = load_checkpoint(*resume);
    restore_weights(model, c);
    if (c.train_text != cfg.render()) {
      // Only the epoch budget may change between a run and its continuation.
      auto strip = [](const std::string& t) {
        std::string s;
        for (const auto& [k, v] : parse_kv_lines(t, "train config"))
          if (k != "epochs") s += k + "=" + v + "\n";
        return s;
      };
      if (strip(c.train_text) != strip(cfg.render())) {
        throw ConfigConflictError("resume checkpoint was trained with a different configuration");
      }
    }
    if (!(c.stats == data.stats())) throw ConfigConflictError("resume checkpoint uses different normalisation stats");
    moments = c.moments;
    state = c.state;
    if (fs::exists(csv_path)) {
      // Keep only rows the checkpoint has already seen.
      std::istringstream lines(read_text_file(csv_path));
      std::string line;
      while (std::getline(lines, line)) {
        if (line.empty()) continue;
        if (csv.empty()) {
          csv = line + "\n";
          continue;
        }
        if (std::stoull(line.substr(0, line.find(','))) <= state.epoch) csv += line + "\n";
      }
    }
  }
  if (csv.empty()) csv = kLossCsvHeader;

  const Terrain& terrain = data.terrain();
  for (std::size_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::int64_t> order = train_inits;
    CounterRng(state.rng).substream(epoch).shuffle(std::span<std::int64_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::span<const std::int64_t> batch(order.data() + b, std::min(cfg.batch_size, order.size() - b));
      const ModelInput in = assemble_input(data, batch, model.t_in(), model.t_force(), data.truth_winds());
      const Tensor truth = assemble_target(data, batch);
      model.params().zero_grad();
      LossParts parts;
      {
        Tape tape;
        Var loss = masked_loss(model.forward(tape, in, terrain), truth, data.mask(), cfg.weights, &parts);
        tape.backward(loss);
      }
      if (state.step == 0 && epoch == 0) result.initial_train_loss = parts.total;
      adam_step(model.params(), moments, cfg, ++state.step);
      epoch_loss += parts.total * static_cast<double>(batch.size());
      csv += std::to_string(epoch + 1) + "," + std::to_string(state.step) + ",train," + format_double(parts.total) +
             "," + format_double(parts.channel[0]) + "," + format_double(parts.channel[1]) + "," +
             format_double(parts.channel[2]) + "," + format_double(parts.channel[3]) + ",\n";
    }
    const ValidationScore val = validate_model(model, data, val_inits, cfg);
    csv += std::to_string(epoch + 1) + "," + std::to_string(state.step) + ",val," + format_double(val.loss.total) +
           "," + format_double(val.loss.channel[0]) + "," + format_double(val.loss.channel[1]) + "," +
           format_double(val.loss.channel[2]) + "," + format_double(val.loss.channel[3]) + "," +
           format_double(val.swh_rmse_m) + "\n";
    state.epoch = epoch + 1;
    const bool improved = val.swh_rmse_m < state.best_val;
    if (improved) {
      state.best_val = val.swh_rmse_m;
      state.best_epoch = state.epoch;
    }
    const Checkpoint ckpt = make_checkpoint(model, cfg, data.geometry(), data.stats(), moments, state);
    if (improved) save_checkpoint(ckpt, result.best);
    save_checkpoint(ckpt, result.last);
    write_text_file(csv_path, csv);
    if (log) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[256];
      std::snprintf(buf, sizeof buf, "epoch %zu/%zu train_loss %.6f val_loss %.6f val_swh_rmse %.4f m%s (%.1f s)",
                    state.epoch, cfg.epochs, epoch_loss / static_cast<double>(order.size()), val.loss.total,
                    val.swh_rmse_m, improved ? " *" : "", secs);
      log(buf);
    }
  }
  result.state = state;
  return result;
}

}  // namespace wavecast
