#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wavecast/autodiff.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/grid.hpp"
#include "wavecast/kv.hpp"
#include "wavecast/model.hpp"
#include "wavecast/rng.hpp"

namespace wavecast {

struct ViTConfig {
  std::size_t patch = 4;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_enc_blocks = 2;
  std::size_t n_dec_blocks = 2;
  std::size_t t_in = 2;
  std::size_t t_force = 1;
  std::size_t conv_layers = 2;
  std::size_t mlp_ratio = 4;
  bool terrain = true;   // false drops the terrain encoding (position-free tokens)
  bool residual = false; // predict an increment over the last history state

  void validate(const GridGeometry& g) const {
    if (patch == 0 || g.lat_count % patch != 0 || g.lon_count % patch != 0) {
      throw ShapeError("patch " + std::to_string(patch) + " does not divide grid " + std::to_string(g.lat_count) +
                       "x" + std::to_string(g.lon_count));
    }
    if (n_heads == 0 || d_model % n_heads != 0) {
      throw ConfigError("n_heads=" + std::to_string(n_heads) + " must divide d_model=" + std::to_string(d_model));
    }
    if (t_in == 0 || t_force == 0 || mlp_ratio == 0) throw ConfigError("t_in, t_force and mlp_ratio must be >= 1");
  }

  std::string render() const {
    return "patch=" + std::to_string(patch) + "\nd_model=" + std::to_string(d_model) +
           "\nn_heads=" + std::to_string(n_heads) + "\nn_enc_blocks=" + std::to_string(n_enc_blocks) +
           "\nn_dec_blocks=" + std::to_string(n_dec_blocks) + "\nt_in=" + std::to_string(t_in) +
           "\nt_force=" + std::to_string(t_force) + "\nconv_layers=" + std::to_string(conv_layers) +
           "\nmlp_ratio=" + std::to_string(mlp_ratio) + "\nterrain=" + (terrain ? "1" : "0") +
           "\nresidual=" + (residual ? "1" : "0") + "\n";
  }
};

// ---------------------------------------------------------------------------
// Patches. Patch order is row-major over the patch grid; within a patch the
// layout is (channel, row, column).

inline void check_patch(std::size_t h, std::size_t w, std::size_t p) {
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw ShapeError("patch size " + std::to_string(p) + " does not divide " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
}

/// [C, H, W] -> [N, C*p*p].
inline Tensor patchify(const Tensor& x, std::size_t p) {
  if (x.rank() != 3) throw ShapeError("patchify expects [C, H, W], got " + to_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  check_patch(h, w, p);
  const std::size_t hp = h / p, wp = w / p;
  Tensor out({hp * wp, c * p * p});
  std::size_t o = 0;
  for (std::size_t pi = 0; pi < hp; ++pi)
    for (std::size_t pj = 0; pj < wp; ++pj)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t xx = 0; xx < p; ++xx) out[o++] = x[(ch * h + pi * p + y) * w + pj * p + xx];
  return out;
}

/// [N, C*p*p] -> [C, H, W]; inverse of patchify.
inline Tensor unpatchify(const Tensor& t, std::size_t c, std::size_t h, std::size_t w, std::size_t p) {
  check_patch(h, w, p);
  const std::size_t hp = h / p, wp = w / p;
  if (t.rank() != 2 || t.dim(0) != hp * wp || t.dim(1) != c * p * p) {
    throw ShapeError("unpatchify expects [" + std::to_string(hp * wp) + ", " + std::to_string(c * p * p) + "], got " +
                     to_string(t.shape()));
  }
  Tensor out({c, h, w});
  std::size_t o = 0;
  for (std::size_t pi = 0; pi < hp; ++pi)
    for (std::size_t pj = 0; pj < wp; ++pj)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t xx = 0; xx < p; ++xx) out[(ch * h + pi * p + y) * w + pj * p + xx] = t[o++];
  return out;
}

/// Batched, differentiable: [B, C, H, W] -> [B, N, C*p*p].
inline Var patchify(Var x, std::size_t p) {
  const Shape s = x.shape();
  if (s.size() != 4) throw ShapeError("patchify expects [B, C, H, W], got " + to_string(s));
  check_patch(s[2], s[3], p);
  const std::size_t b = s[0], c = s[1], hp = s[2] / p, wp = s[3] / p;
  Var r = reshape(x, {b, c, hp, p, wp, p});
  r = permute(r, {0, 2, 4, 1, 3, 5});
  return reshape(r, {b, hp * wp, c * p * p});
}

/// Batched, differentiable: [B, N, C*p*p] -> [B, C, H, W].
inline Var unpatchify(Var t, std::size_t c, std::size_t h, std::size_t w, std::size_t p) {
  check_patch(h, w, p);
  const Shape s = t.shape();
  const std::size_t hp = h / p, wp = w / p;
  if (s.size() != 3 || s[1] != hp * wp || s[2] != c * p * p) {
    throw ShapeError("unpatchify expects [B, " + std::to_string(hp * wp) + ", " + std::to_string(c * p * p) +
                     "], got " + to_string(s));
  }
  Var r = reshape(t, {s[0], hp, wp, c, p, p});
  r = permute(r, {0, 3, 1, 4, 2, 5});
  return reshape(r, {s[0], c, h, w});
}

// ---------------------------------------------------------------------------
// Terrain encoding

/// Per-patch (mean elevation, min elevation, ocean fraction), each standardised
/// across patches; a constant feature maps to 0. Returns [N, 3].
inline Tensor terrain_features(const GridField& depth, std::size_t p) {
  const GridGeometry& g = depth.geom;
  check_patch(g.lat_count, g.lon_count, p);
  const std::size_t hp = g.lat_count / p, wp = g.lon_count / p, n = hp * wp;
  Tensor f({n, 3});
  for (std::size_t pi = 0; pi < hp; ++pi)
    for (std::size_t pj = 0; pj < wp; ++pj) {
      double sum = 0.0, mn = std::numeric_limits<double>::infinity(), ocean = 0.0;
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x) {
          const double e = depth.at(pi * p + y, pj * p + x);
          sum += e;
          mn = std::min(mn, e);
          ocean += e < 0.0 ? 1.0 : 0.0;
        }
      const std::size_t k = pi * wp + pj;
      const double cells = static_cast<double>(p * p);
      f[k * 3 + 0] = sum / cells;
      f[k * 3 + 1] = mn;
      f[k * 3 + 2] = ocean / cells;
    }
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += f[k * 3 + j];
    mean /= static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) var += (f[k * 3 + j] - mean) * (f[k * 3 + j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) f[k * 3 + j] = sd > 1e-12 ? (f[k * 3 + j] - mean) / sd : 0.0;
  }
  return f;
}

/// [N, d_model] embedding: linear map (no bias) of the terrain features.
inline Var terrain_encode(Tape& tape, const GridField& depth, std::size_t p, Var projection) {
  return matmul(tape.constant(terrain_features(depth, p)), projection);
}

// ---------------------------------------------------------------------------
// Attention

struct AttentionWeights {
  Var wq, wk, wv, wo;
};

struct NormWeights {
  Var gain, bias;
};

struct MlpWeights {
  Var w1, b1, w2, b2;
};

/// Multi-head scaled dot-product attention without biases.
/// queries [S, Lq, d], keys/values [S, Lk, d] -> [S, Lq, d].
inline Var multi_head_attention(Var queries, Var memory, const AttentionWeights& w, std::size_t heads) {
  const Shape qs = queries.shape(), ms = memory.shape();
  if (qs.size() != 3 || ms.size() != 3 || qs[0] != ms[0] || qs[2] != ms[2]) {
    throw ShapeError("attention operands " + to_string(qs) + " and " + to_string(ms) + " are incompatible");
  }
  const std::size_t s = qs[0], lq = qs[1], lk = ms[1], d = qs[2], dh = d / heads;
  auto split = [&](Var x, std::size_t len) {
    Var r = reshape(x, {s, len, heads, dh});
    r = permute(r, {0, 2, 1, 3});
    return reshape(r, {s * heads, len, dh});
  };
  Var q = split(matmul(queries, w.wq), lq);
  Var k = split(matmul(memory, w.wk), lk);
  Var v = split(matmul(memory, w.wv), lk);
  Var scores = matmul(q, transpose_last2(k)) * (1.0 / std::sqrt(static_cast<double>(dh)));
  Var attn = softmax_lastdim(scores);
  Var merged = matmul(attn, v);  // [S*h, Lq, dh]
  merged = reshape(merged, {s, heads, lq, dh});
  merged = permute(merged, {0, 2, 1, 3});
  merged = reshape(merged, {s, lq, d});
  return matmul(merged, w.wo);
}

/// Residual connection followed by layer normalisation.
inline Var add_norm(Var x, Var sublayer, const NormWeights& n) { return layer_norm(x + sublayer, n.gain, n.bias); }

inline Var mlp(Var x, const MlpWeights& w) { return matmul(gelu(matmul(x, w.w1) + w.b1), w.w2) + w.b2; }

/// Self-attention across time for every patch independently. x [B, T, N, d].
inline Var temporal_attention(Var x, const AttentionWeights& w, const NormWeights& n, std::size_t heads) {
  const Shape s = x.shape();
  const std::size_t b = s[0], t = s[1], np = s[2], d = s[3];
  Var r = reshape(permute(x, {0, 2, 1, 3}), {b * np, t, d});
  Var a = multi_head_attention(r, r, w, heads);
  a = permute(reshape(a, {b, np, t, d}), {0, 2, 1, 3});
  return add_norm(x, a, n);
}

/// Self-attention across patches for every time index independently. x [B, T, N, d].
inline Var spatial_attention(Var x, const AttentionWeights& w, const NormWeights& n, std::size_t heads) {
  const Shape s = x.shape();
  Var r = reshape(x, {s[0] * s[1], s[2], s[3]});
  Var a = reshape(multi_head_attention(r, r, w, heads), s);
  return add_norm(x, a, n);
}

// ---------------------------------------------------------------------------
// Model

class ViTModel : public Model {
 public:
  struct EncoderBlock {
    AttentionWeights temporal, spatial;
    MlpWeights mlp;
    NormWeights ln1, ln2, ln3;
  };
  struct DecoderBlock {
    AttentionWeights self, cross;
    MlpWeights mlp;
    NormWeights ln1, ln2, ln3;
  };
  /// Parameters bound to one tape.
  struct Bound {
    Var wave_w, wave_b, wind_w, wind_b, terrain;
    std::vector<EncoderBlock> enc;
    std::vector<DecoderBlock> dec;
    Var head_w, head_b;
    std::vector<Var> conv;
  };

  ViTModel(ViTConfig cfg, GridGeometry geom, std::uint64_t seed) : cfg_(cfg), geom_(geom) {
    cfg_.validate(geom_);
    CounterRng rng = CounterRng(seed).substream(0x564954ULL);
    const std::size_t d = cfg_.d_model, p2 = cfg_.patch * cfg_.patch, hidden = d * cfg_.mlp_ratio;
    auto matrix = [&](const std::string& name, std::size_t in, std::size_t out) {
      params_.add(name, glorot_uniform({in, out}, in, out, rng));
    };
    auto zeros = [&](const std::string& name, Shape s) { params_.add(name, Tensor(std::move(s), 0.0)); };
    auto ones = [&](const std::string& name, Shape s) { params_.add(name, Tensor(std::move(s), 1.0)); };
    auto attention = [&](const std::string& prefix) {
      for (const char* m : {"wq", "wk", "wv", "wo"}) matrix(prefix + "." + m, d, d);
    };
    auto block_tail = [&](const std::string& prefix) {
      matrix(prefix + ".mlp.w1", d, hidden);
      zeros(prefix + ".mlp.b1", {hidden});
      matrix(prefix + ".mlp.w2", hidden, d);
      zeros(prefix + ".mlp.b2", {d});
      for (const char* ln : {"ln1", "ln2", "ln3"}) {
        ones(prefix + "." + ln + ".gain", {d});
        zeros(prefix + "." + ln + ".bias", {d});
      }
    };

    params_.add("embed.wave.w", glorot_uniform({cfg_.t_in, 4 * p2, d}, 4 * p2, d, rng));
    zeros("embed.wave.b", {cfg_.t_in, 1, d});
    params_.add("embed.wind.w", glorot_uniform({cfg_.t_force, 2 * p2, d}, 2 * p2, d, rng));
    zeros("embed.wind.b", {cfg_.t_force, 1, d});
    matrix("terrain.w", 3, d);
    for (std::size_t i = 0; i < cfg_.n_enc_blocks; ++i) {
      const std::string pre = "enc" + std::to_string(i);
      attention(pre + ".temporal");
      attention(pre + ".spatial");
      block_tail(pre);
    }
    for (std::size_t i = 0; i < cfg_.n_dec_blocks; ++i) {
      const std::string pre = "dec" + std::to_string(i);
      attention(pre + ".self");
      attention(pre + ".cross");
      block_tail(pre);
    }
    matrix("head.proj.w", d, 4 * p2);
    zeros("head.proj.b", {4 * p2});
    for (std::size_t i = 0; i < cfg_.conv_layers; ++i) {
      // Centre-delta identity plus a small perturbation.
      Tensor k({4, 4, 3, 3});
      for (auto& v : k.storage()) v = rng.uniform(-0.05, 0.05);
      for (std::size_t c = 0; c < 4; ++c) k[((c * 4 + c) * 3 + 1) * 3 + 1] += 1.0;
      params_.add("head.conv" + std::to_string(i), std::move(k));
    }
  }

  ModelKind kind() const override { return ModelKind::ViT; }
  ParameterSet& params() override { return params_; }
  const ParameterSet& params() const override { return params_; }
  std::size_t t_in() const override { return cfg_.t_in; }
  std::size_t t_force() const override { return cfg_.t_force; }
  const ViTConfig& config() const { return cfg_; }
  const GridGeometry& geometry() const { return geom_; }
  std::size_t patch_count() const { return (geom_.lat_count / cfg_.patch) * (geom_.lon_count / cfg_.patch); }

  std::string describe() const override { return "model=vit\n" + cfg_.render(); }

  Bound bind(Tape& tape) {
    auto p = [&](const std::string& name) {
      Parameter* q = params_.find(name);
      if (!q) throw ContractError("missing parameter " + name);
      return tape.param(*q);
    };
    auto attention = [&](const std::string& pre) {
      return AttentionWeights{p(pre + ".wq"), p(pre + ".wk"), p(pre + ".wv"), p(pre + ".wo")};
    };
    auto tail = [&](const std::string& pre, MlpWeights& m, NormWeights& a, NormWeights& b, NormWeights& c) {
      m = MlpWeights{p(pre + ".mlp.w1"), p(pre + ".mlp.b1"), p(pre + ".mlp.w2"), p(pre + ".mlp.b2")};
      a = NormWeights{p(pre + ".ln1.gain"), p(pre + ".ln1.bias")};
      b = NormWeights{p(pre + ".ln2.gain"), p(pre + ".ln2.bias")};
      c = NormWeights{p(pre + ".ln3.gain"), p(pre + ".ln3.bias")};
    };
    Bound b;
    b.wave_w = p("embed.wave.w");
    b.wave_b = p("embed.wave.b");
    b.wind_w = p("embed.wind.w");
    b.wind_b = p("embed.wind.b");
    b.terrain = p("terrain.w");
    for (std::size_t i = 0; i < cfg_.n_enc_blocks; ++i) {
      const std::string pre = "enc" + std::to_string(i);
      EncoderBlock e{attention(pre + ".temporal"), attention(pre + ".spatial"), {}, {}, {}, {}};
      tail(pre, e.mlp, e.ln1, e.ln2, e.ln3);
      b.enc.push_back(e);
    }
    for (std::size_t i = 0; i < cfg_.n_dec_blocks; ++i) {
      const std::string pre = "dec" + std::to_string(i);
      DecoderBlock e{attention(pre + ".self"), attention(pre + ".cross"), {}, {}, {}, {}};
      tail(pre, e.mlp, e.ln1, e.ln2, e.ln3);
      b.dec.push_back(e);
    }
    b.head_w = p("head.proj.w");
    b.head_b = p("head.proj.b");
    for (std::size_t i = 0; i < cfg_.conv_layers; ++i) b.conv.push_back(p("head.conv" + std::to_string(i)));
    return b;
  }

  /// Per-time-step patch embedding. x [B, T, C, H, W] with per-step weights w [T, C*p*p, d], bias [T, 1, d]
  /// -> tokens [B, T, N, d].
  Var embed(Var x, Var w, Var bias) const {
    const Shape s = x.shape();
    const std::size_t b = s[0], t = s[1], c = s[2], n = patch_count(), p = cfg_.patch;
    Var patches = patchify(reshape(x, {b * t, c, s[3], s[4]}), p);           // [B*T, N, C*p*p]
    patches = permute(reshape(patches, {b, t, n, c * p * p}), {1, 0, 2, 3});  // [T, B, N, C*p*p]
    Var tokens = matmul(reshape(patches, {t, b * n, c * p * p}), w) + bias;  // [T, B*N, d]
    return permute(reshape(tokens, {t, b, n, cfg_.d_model}), {1, 0, 2, 3});
  }

  /// Wave history -> memory tokens [B, t_in, N, d].
  Var encoder_forward(Tape& tape, const Bound& w, Var waves, const GridField& depth) const {
    Var x = embed(waves, w.wave_w, w.wave_b);
    if (cfg_.terrain) x = x + terrain_encode(tape, depth, cfg_.patch, w.terrain);
    for (const auto& blk : w.enc) {
      x = temporal_attention(x, blk.temporal, blk.ln1, cfg_.n_heads);
      x = spatial_attention(x, blk.spatial, blk.ln2, cfg_.n_heads);
      x = add_norm(x, mlp(x, blk.mlp), blk.ln3);
    }
    return x;
  }

  /// Wind tokens cross-attend to the wave memory. Returns [B, t_force, N, d].
  Var decoder_forward(Tape& tape, const Bound& w, Var winds, Var memory, const GridField& depth) const {
    Var y = embed(winds, w.wind_w, w.wind_b);
    if (cfg_.terrain) y = y + terrain_encode(tape, depth, cfg_.patch, w.terrain);
    return decode_tokens(w, y, memory);
  }

  /// Decoder blocks on already-embedded wind tokens y [B, T_f, N, d] and memory [B, T, N, d].
  Var decode_tokens(const Bound& w, Var y, Var memory) const {
    const Shape ys = y.shape(), ms = memory.shape();
    if (ys.back() != ms.back()) {
      throw ShapeError("decoder width " + std::to_string(ys.back()) + " does not match memory width " +
                       std::to_string(ms.back()));
    }
    Var q = reshape(y, {ys[0], ys[1] * ys[2], ys[3]});
    Var mem = reshape(memory, {ms[0], ms[1] * ms[2], ms[3]});
    for (const auto& blk : w.dec) {
      q = add_norm(q, multi_head_attention(q, q, blk.self, cfg_.n_heads), blk.ln1);
      q = add_norm(q, multi_head_attention(q, mem, blk.cross, cfg_.n_heads), blk.ln2);
      q = add_norm(q, mlp(q, blk.mlp), blk.ln3);
    }
    return reshape(q, ys);
  }

  /// Last decoded step -> un-patch projection -> 3x3 conv refinement -> land re-mask. [B, 4, H, W].
  Var conv_head(Tape& tape, const Bound& w, Var decoded, const LandMask& mask) const {
    const Shape s = decoded.shape();
    Var last = reshape(slice(decoded, 1, s[1] - 1, s[1]), {s[0], s[2], s[3]});
    Var field = unpatchify(matmul(last, w.head_w) + w.head_b, 4, geom_.lat_count, geom_.lon_count, cfg_.patch);
    for (std::size_t i = 0; i < w.conv.size(); ++i) {
      field = conv2d(field, w.conv[i]);
      if (i + 1 < w.conv.size()) field = gelu(field);
    }
    return field * tape.constant(ocean_tensor(mask));
  }

  Var forward(Tape& tape, const ModelInput& in, const Terrain& terrain) override {
    check_input(in, cfg_.t_in, cfg_.t_force, geom_);
    require_same_geometry(terrain.depth.geom, geom_, "terrain");
    const Bound w = bind(tape);
    Var waves = tape.constant(in.waves);
    Var memory = encoder_forward(tape, w, waves, terrain.depth);
    Var decoded = decoder_forward(tape, w, tape.constant(in.winds), memory, terrain.depth);
    Var out = conv_head(tape, w, decoded, terrain.mask);
    if (cfg_.residual) {
      const std::size_t b = in.waves.dim(0), h = geom_.lat_count, wd = geom_.lon_count;
      Var last = reshape(slice(waves, 1, cfg_.t_in - 1, cfg_.t_in), {b, 4, h, wd});
      out = out + last;
    }
    return out;
  }

 private:
  ViTConfig cfg_;
  GridGeometry geom_;
  ParameterSet params_;
};

}  // namespace wavecast
