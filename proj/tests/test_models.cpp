#include <cmath>
#include <gtest/gtest.h>

#include "wavecast/convlstm.hpp"
#include "wavecast/training.hpp"
#include "wavecast/vit.hpp"
#include "support.hpp"

using namespace wavecast;
using namespace wavecast::testing;

namespace {

Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

AttentionWeights random_attention(Tape& tape, std::size_t d, CounterRng& rng) {
  return {tape.constant(random_tensor({d, d}, rng)), tape.constant(random_tensor({d, d}, rng)),
          tape.constant(random_tensor({d, d}, rng)), tape.constant(random_tensor({d, d}, rng))};
}

NormWeights unit_norm(Tape& tape, std::size_t d) {
  return {tape.constant(Tensor({d}, 1.0)), tape.constant(Tensor({d}, 0.0))};
}

}  // namespace

// ---------------------------------------------------------------------------
// Patches

TEST(Patchify, ShapeAndRoundTripIsExact) {
  CounterRng rng(1);
  const Tensor x = random_tensor({4, 32, 64}, rng);
  const Tensor p = patchify(x, 4);
  EXPECT_EQ(p.shape(), (Shape{128, 64}));
  EXPECT_EQ(unpatchify(p, 4, 32, 64, 4), x);
}

TEST(Patchify, LayoutIsChannelRowColumnWithinPatch) {
  Tensor x({2, 4, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const Tensor p = patchify(x, 2);
  // Patch (0,1) covers rows 0-1, cols 2-3.
  EXPECT_EQ(p[1 * 8 + 0], x[0 * 16 + 0 * 4 + 2]);
  EXPECT_EQ(p[1 * 8 + 3], x[0 * 16 + 1 * 4 + 3]);
  EXPECT_EQ(p[1 * 8 + 4], x[1 * 16 + 0 * 4 + 2]);
}

TEST(Patchify, NonDividingPatchIsShapeError) {
  const Tensor x({4, 32, 64}, 0.0);
  EXPECT_THROW(patchify(x, 3), ShapeError);
  EXPECT_THROW(ViTModel(ViTConfig{.patch = 3}, GridGeometry::global(32, 64), 1), ShapeError);
}

TEST(Patchify, TapeVersionMatchesTensorVersion) {
  CounterRng rng(2);
  const Tensor x = random_tensor({2, 4, 8, 16}, rng);
  Tape tape(false);
  const Tensor p = patchify(tape.constant(x), 4).value();
  EXPECT_EQ(p.shape(), (Shape{2, 8, 64}));
  for (std::size_t b = 0; b < 2; ++b) {
    Tensor xb({4, 8, 16});
    std::copy_n(x.storage().begin() + static_cast<std::ptrdiff_t>(b * xb.size()), xb.size(), xb.storage().begin());
    const Tensor pb = patchify(xb, 4);
    for (std::size_t i = 0; i < pb.size(); ++i) EXPECT_EQ(p[b * pb.size() + i], pb[i]);
  }
  EXPECT_EQ(unpatchify(tape.constant(p), 4, 8, 16, 4).value(), x);
}

// ---------------------------------------------------------------------------
// Terrain

TEST(Terrain, IdenticalPatchesGetIdenticalEmbeddings) {
  const auto g = GridGeometry::global(8, 16);
  GridField depth(VarId::Depth, Units::Meters, g, kStaticTime);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 16; ++j) depth.at(i, j) = -100.0 * static_cast<double>(i * 16 + j);
  // Copy patch (0,0) onto patch (1,3).
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) depth.at(4 + y, 12 + x) = depth.at(y, x);
  CounterRng rng(3);
  Tape tape(false);
  const Tensor e = terrain_encode(tape, depth, 4, tape.constant(random_tensor({3, 8}, rng))).value();
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(e[0 * 8 + k], e[7 * 8 + k]);
  EXPECT_NE(e[0], e[8]);
}

TEST(Terrain, ConstantDepthGivesEqualEmbeddings) {
  const auto g = GridGeometry::global(8, 16);
  const GridField depth(VarId::Depth, Units::Meters, g, kStaticTime, -3000.0);
  const Tensor f = terrain_features(depth, 4);
  for (double v : f.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Terrain, ZeroProjectionGivesZero) {
  const auto g = GridGeometry::global(8, 16);
  const Terrain t = toy_terrain(g);
  Tape tape(false);
  const Tensor e = terrain_encode(tape, t.depth, 4, tape.constant(Tensor({3, 8}, 0.0))).value();
  for (double v : e.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Terrain, FeaturesAreStandardised) {
  const auto g = GridGeometry::global(16, 16);
  const Tensor f = terrain_features(toy_terrain(g).depth, 4);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < 16; ++k) mean += f[k * 3 + j];
    mean /= 16.0;
    for (std::size_t k = 0; k < 16; ++k) sq += (f[k * 3 + j] - mean) * (f[k * 3 + j] - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq / 16.0, 1.0, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Attention

TEST(Attention, SingleKeyReturnsProjectedValue) {
  CounterRng rng(4);
  Tape tape(false);
  const std::size_t d = 8;
  const auto w = random_attention(tape, d, rng);
  const Tensor q = random_tensor({1, 5, d}, rng);
  const Tensor m = random_tensor({1, 1, d}, rng);
  const Tensor out = multi_head_attention(tape.constant(q), tape.constant(m), w, 2).value();
  const Tensor expect = matmul_oracle(matmul_oracle(m.reshaped({1, d}), w.wv.value()), w.wo.value());
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(out[i * d + k], expect[k], 1e-12);
}

TEST(Attention, MatchesScalarReference) {
  CounterRng rng(5);
  Tape tape(false);
  const std::size_t d = 6, heads = 3, dh = 2, lq = 3, lk = 4;
  const auto w = random_attention(tape, d, rng);
  const Tensor q = random_tensor({1, lq, d}, rng), m = random_tensor({1, lk, d}, rng);
  const Tensor out = multi_head_attention(tape.constant(q), tape.constant(m), w, heads).value();
  const Tensor qq = matmul_oracle(q.reshaped({lq, d}), w.wq.value());
  const Tensor kk = matmul_oracle(m.reshaped({lk, d}), w.wk.value());
  const Tensor vv = matmul_oracle(m.reshaped({lk, d}), w.wv.value());
  Tensor merged({lq, d});
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < lq; ++i) {
      std::vector<double> s(lk);
      double mx = -1e300, z = 0.0;
      for (std::size_t j = 0; j < lk; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += qq[i * d + h * dh + c] * kk[j * d + h * dh + c];
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      for (auto& v : s) z += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < lk; ++j) acc += s[j] / z * vv[j * d + h * dh + c];
        merged[i * d + h * dh + c] = acc;
      }
    }
  const Tensor expect = matmul_oracle(merged, w.wo.value());
  EXPECT_LT(max_abs_diff(out.reshaped({lq, d}), expect), 1e-12);
}

TEST(TemporalAttention, SingleStepIsValueProjectionResidual) {
  CounterRng rng(6);
  Tape tape(false);
  const std::size_t d = 8;
  const auto w = random_attention(tape, d, rng);
  const auto n = unit_norm(tape, d);
  Var x = tape.constant(random_tensor({2, 1, 5, d}, rng));
  const Tensor out = temporal_attention(x, w, n, 2).value();
  const Tensor expect = add_norm(x, matmul(matmul(x, w.wv), w.wo), n).value();
  EXPECT_LT(max_abs_diff(out, expect), 1e-12);
}

TEST(TemporalAttention, ShapeAndIdenticalPatches) {
  CounterRng rng(7);
  Tape tape(false);
  const std::size_t d = 16;
  const auto w = random_attention(tape, d, rng);
  const auto n = unit_norm(tape, d);
  // Every patch carries the same time series.
  const Tensor series = random_tensor({3, d}, rng);
  Tensor x({1, 3, 8, d});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 8; ++p)
      for (std::size_t k = 0; k < d; ++k) x[(t * 8 + p) * d + k] = series[t * d + k];
  const Tensor out = temporal_attention(tape.constant(x), w, n, 4).value();
  ASSERT_EQ(out.shape(), (Shape{1, 3, 8, d}));
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 1; p < 8; ++p)
      for (std::size_t k = 0; k < d; ++k) EXPECT_EQ(out[(t * 8 + p) * d + k], out[(t * 8) * d + k]);
}

TEST(SpatialAttention, PermutationEquivariant) {
  CounterRng rng(8);
  Tape tape(false);
  const std::size_t d = 8, np = 6;
  const auto w = random_attention(tape, d, rng);
  const auto n = unit_norm(tape, d);
  const Tensor x = random_tensor({1, 2, np, d}, rng);
  const std::size_t perm[np] = {3, 0, 5, 1, 4, 2};
  Tensor xp(x.shape());
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t k = 0; k < d; ++k) xp[(t * np + p) * d + k] = x[(t * np + perm[p]) * d + k];
  const Tensor a = spatial_attention(tape.constant(x), w, n, 2).value();
  const Tensor b = spatial_attention(tape.constant(xp), w, n, 2).value();
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(b[(t * np + p) * d + k], a[(t * np + perm[p]) * d + k], 1e-9);
}

TEST(SpatialAttention, SinglePatchAndIdenticalSteps) {
  CounterRng rng(9);
  Tape tape(false);
  const std::size_t d = 8;
  const auto w = random_attention(tape, d, rng);
  const auto n = unit_norm(tape, d);
  Var one = tape.constant(random_tensor({1, 2, 1, d}, rng));
  EXPECT_LT(max_abs_diff(spatial_attention(one, w, n, 2).value(),
                         add_norm(one, matmul(matmul(one, w.wv), w.wo), n).value()),
            1e-12);
  // Same patch field at both time steps -> same output at both steps.
  const Tensor field = random_tensor({4, d}, rng);
  Tensor x({1, 2, 4, d});
  for (std::size_t t = 0; t < 2; ++t) std::copy(field.storage().begin(), field.storage().end(), x.storage().begin() + static_cast<std::ptrdiff_t>(t * field.size()));
  const Tensor out = spatial_attention(tape.constant(x), w, n, 2).value();
  for (std::size_t i = 0; i < field.size(); ++i) EXPECT_EQ(out[i], out[field.size() + i]);
}

// ---------------------------------------------------------------------------
// Encoder / decoder

TEST(Encoder, ShapeDeterminismAndZeroWeights) {
  const auto g = GridGeometry::global(16, 16);
  const Terrain terrain = toy_terrain(g);
  ViTModel a(small_vit(), g, 11), b(small_vit(), g, 11);
  const ModelInput in = toy_input(2, 2, 1, g, terrain.mask, 12);
  Tape ta(false), tb(false);
  const Tensor ea = a.encoder_forward(ta, a.bind(ta), ta.constant(in.waves), terrain.depth).value();
  const Tensor eb = b.encoder_forward(tb, b.bind(tb), tb.constant(in.waves), terrain.depth).value();
  EXPECT_EQ(ea.shape(), (Shape{2, 2, 16, 8}));
  EXPECT_EQ(ea, eb);

  for (auto& p : a.params()) p.value.fill(0.0);
  Tape tz(false);
  const Tensor ez = a.encoder_forward(tz, a.bind(tz), tz.constant(in.waves), terrain.depth).value();
  EXPECT_TRUE(ez.all_finite());
}

TEST(Decoder, ShapeAndSingleMemoryToken) {
  const auto g = GridGeometry::global(16, 16);
  ViTConfig cfg = small_vit();
  cfg.n_dec_blocks = 1;
  ViTModel m(cfg, g, 13);
  CounterRng rng(14);
  Tape tape(false);
  const auto w = m.bind(tape);
  Var y = tape.constant(random_tensor({1, 1, 16, 8}, rng));
  Var mem = tape.constant(random_tensor({1, 1, 1, 8}, rng));
  const Tensor out = m.decode_tokens(w, y, mem).value();
  EXPECT_EQ(out.shape(), (Shape{1, 1, 16, 8}));
  // Cross-attention over one memory token is the same vector for every query.
  const Tensor cross = multi_head_attention(reshape(y, {1, 16, 8}), reshape(mem, {1, 1, 8}), w.dec[0].cross, 2).value();
  for (std::size_t i = 1; i < 16; ++i)
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(cross[i * 8 + k], cross[k], 1e-12);
}

TEST(Decoder, ZeroCrossValueIgnoresMemory) {
  const auto g = GridGeometry::global(16, 16);
  ViTModel m(small_vit(), g, 15);
  m.params().find("dec0.cross.wv")->value.fill(0.0);
  CounterRng rng(16);
  Tape tape(false);
  const auto w = m.bind(tape);
  Var y = tape.constant(random_tensor({1, 1, 16, 8}, rng));
  const Tensor a = m.decode_tokens(w, y, tape.constant(random_tensor({1, 2, 16, 8}, rng))).value();
  const Tensor b = m.decode_tokens(w, y, tape.constant(random_tensor({1, 2, 16, 8}, rng))).value();
  EXPECT_EQ(a, b);
}

TEST(Decoder, WidthMismatchIsShapeError) {
  const auto g = GridGeometry::global(16, 16);
  ViTModel m(small_vit(), g, 15);
  Tape tape(false);
  const auto w = m.bind(tape);
  EXPECT_THROW(m.decode_tokens(w, tape.constant(Tensor({1, 1, 16, 8})), tape.constant(Tensor({1, 2, 16, 4}))),
               ShapeError);
}

// ---------------------------------------------------------------------------
// Conv head

TEST(ConvHead, IdentityKernelReproducesProjection) {
  const auto g = GridGeometry::global(16, 16);
  const LandMask ocean = LandMask::all_ocean(g);
  ViTConfig cfg = small_vit();
  cfg.conv_layers = 1;
  ViTModel m(cfg, g, 17);
  Tensor& k = m.params().find("head.conv0")->value;
  k.fill(0.0);
  for (std::size_t c = 0; c < 4; ++c) k[((c * 4 + c) * 3 + 1) * 3 + 1] = 1.0;
  CounterRng rng(18);
  const Tensor tokens = random_tensor({1, 1, 16, 8}, rng);
  Tape tape(false);
  const auto w = m.bind(tape);
  const Tensor out = m.conv_head(tape, w, tape.constant(tokens), ocean).value();
  const Tensor proj = matmul_oracle(tokens.reshaped({16, 8}), w.head_w.value());
  Tensor biased = proj;
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 64; ++j) biased[i * 64 + j] += w.head_b.value()[j];
  EXPECT_EQ(out.shape(), (Shape{1, 4, 16, 16}));
  EXPECT_LT(max_abs_diff(out.reshaped({4, 16, 16}), unpatchify(biased, 4, 16, 16, 4)), 1e-12);
}

TEST(ConvHead, LandIsZeroAndInfluenceIsLocal) {
  const auto g = GridGeometry::global(16, 16);
  const Terrain terrain = toy_terrain(g);
  ViTModel m(small_vit(), g, 19);  // conv_layers = 2
  CounterRng rng(20);
  Tensor tokens = random_tensor({1, 2, 16, 8}, rng);
  Tape tape(false);
  const auto w = m.bind(tape);
  const Tensor a = m.conv_head(tape, w, tape.constant(tokens), terrain.mask).value();
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t cell = 0; cell < g.cells(); ++cell)
      if (!terrain.mask.ocean(cell)) EXPECT_EQ(a[c * g.cells() + cell], 0.0);
  // Perturb patch (2, 0) of the last step; changes must stay within the patch plus 2 cells (lon wraps).
  for (std::size_t k = 0; k < 8; ++k) tokens[(16 + 8) * 8 + k] += 1.0;
  const Tensor b = m.conv_head(tape, w, tape.constant(tokens), terrain.mask).value();
  bool changed = false;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 16; ++j) {
        const std::size_t idx = (c * 16 + i) * 16 + j;
        const bool near_row = i + 2 >= 8 && i <= 11 + 2;
        const bool near_col = j <= 3 + 2 || j >= 16 - 2;
        if (!(near_row && near_col)) {
          EXPECT_EQ(a[idx], b[idx]) << "c=" << c << " i=" << i << " j=" << j;
        } else if (a[idx] != b[idx]) {
          changed = true;
        }
      }
  EXPECT_TRUE(changed);
  // Earlier decoded steps do not reach the head.
  Tensor early = tokens;
  for (std::size_t k = 0; k < 16 * 8; ++k) early[k] += 5.0;
  EXPECT_EQ(m.conv_head(tape, w, tape.constant(early), terrain.mask).value(), b);
}

// ---------------------------------------------------------------------------
// Full model

TEST(ViT, DefaultParameterCount) {
  const ViTModel m(ViTConfig{}, GridGeometry::global(32, 64), 1);
  EXPECT_EQ(m.params().scalar_count(), 280032u);
}

TEST(ViT, OutputShapeMaskAndDeterminism) {
  const auto g = GridGeometry::global(16, 16);
  const Terrain terrain = toy_terrain(g);
  ViTModel a(small_vit(), g, 21), b(small_vit(), g, 21);
  const ModelInput in = toy_input(3, 2, 1, g, terrain.mask, 22);
  Tape ta(false), tb(false);
  const Tensor ya = a.forward(ta, in, terrain).value();
  EXPECT_EQ(ya.shape(), (Shape{3, 4, 16, 16}));
  EXPECT_EQ(ya, b.forward(tb, in, terrain).value());
  for (std::size_t s = 0; s < 12; ++s)
    for (std::size_t c = 0; c < g.cells(); ++c)
      if (!terrain.mask.ocean(c)) EXPECT_EQ(ya[s * g.cells() + c], 0.0);
}

TEST(ViT, BatchElementsAreIndependent) {
  const auto g = GridGeometry::global(16, 16);
  const Terrain terrain = toy_terrain(g);
  ViTModel m(small_vit(), g, 23);
  const ModelInput in = toy_input(2, 2, 1, g, terrain.mask, 24);
  ModelInput first;
  first.waves = Tensor({1, 2, 4, 16, 16});
  first.winds = Tensor({1, 1, 2, 16, 16});
  std::copy_n(in.waves.storage().begin(), first.waves.size(), first.waves.storage().begin());
  std::copy_n(in.winds.storage().begin(), first.winds.size(), first.winds.storage().begin());
  Tape t1(false), t2(false);
  const Tensor both = m.forward(t1, in, terrain).value();
  const Tensor one = m.forward(t2, first, terrain).value();
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_NEAR(both[i], one[i], 1e-12);
}

TEST(ViT, WrongInputShapeIsShapeError) {
  const auto g = GridGeometry::global(16, 16);
  const Terrain terrain = toy_terrain(g);
  ViTModel m(small_vit(), g, 25);
  ModelInput in = toy_input(1, 3, 1, g, terrain.mask, 26);
  Tape tape(false);
  EXPECT_THROW(m.forward(tape, in, terrain), ShapeError);
}

TEST(ViT, GradientCheck) {
  const auto g = GridGeometry::global(16, 16);
  const Terrain terrain = toy_terrain(g);
  ViTModel m(small_vit(), g, 27);
  const ModelInput in = toy_input(1, 2, 1, g, terrain.mask, 28);
  CounterRng rng(29);
  const Tensor truth = random_tensor({1, 4, 16, 16}, rng);
  std::vector<Parameter*> ps;
  for (auto& p : m.params()) ps.push_back(&p);
  const double err = grad_check(
      [&](Tape& t) { return masked_loss(m.forward(t, in, terrain), truth, terrain.mask, {1, 1, 1, 1}); }, ps, 1e-5, 3,
      30);
  EXPECT_LT(err, 1e-4);
}

TEST(ViT, ResidualAddsLastState) {
  const auto g = GridGeometry::global(16, 16);
  const Terrain terrain = toy_terrain(g);
  ViTConfig cfg = small_vit();
  ViTModel plain(cfg, g, 31);
  cfg.residual = true;
  ViTModel res(cfg, g, 31);
  const ModelInput in = toy_input(1, 2, 1, g, terrain.mask, 32);
  Tape ta(false), tb(false);
  const Tensor a = plain.forward(ta, in, terrain).value();
  const Tensor b = res.forward(tb, in, terrain).value();
  const std::size_t n = 4 * g.cells();
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(b[i] - a[i], in.waves[n + i], 1e-12);
}

TEST(ViT, DescriptionRebuildsSameModel) {
  const auto g = GridGeometry::global(16, 16);
  ViTModel m(small_vit(), g, 33);
  const auto copy = model_from_description(m.describe(), g, 33);
  EXPECT_EQ(copy->describe(), m.describe());
  ASSERT_EQ(copy->params().size(), m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(copy->params()[i].value, m.params()[i].value);
}

// ---------------------------------------------------------------------------
// ConvLSTM

TEST(ConvLSTM, ZeroInputAndWeightsGiveHalfGates) {
  const std::size_t hid = 3;
  Tape tape(false);
  const ConvLSTMWeights w{tape.constant(Tensor({4 * hid, 6, 3, 3}, 0.0)), tape.constant(Tensor({4 * hid, hid, 3, 3}, 0.0)),
                          tape.constant(Tensor({4 * hid, 1, 1}, 0.0))};
  const auto s = cell_step(tape.constant(Tensor({1, 6, 4, 8}, 0.0)), std::nullopt, w);
  for (double v : s.cell.value().storage()) EXPECT_EQ(v, 0.0);
  for (double v : s.hidden.value().storage()) EXPECT_EQ(v, 0.0);
  // With a non-zero previous cell, c' = 0.5 * c and h' = 0.5 * tanh(c').
  const RecurrentState prev{tape.constant(Tensor({1, hid, 4, 8}, 0.0)), tape.constant(Tensor({1, hid, 4, 8}, 0.8))};
  const auto s2 = cell_step(tape.constant(Tensor({1, 6, 4, 8}, 0.0)), prev, w);
  for (double v : s2.cell.value().storage()) EXPECT_DOUBLE_EQ(v, 0.4);
  for (double v : s2.hidden.value().storage()) EXPECT_DOUBLE_EQ(v, 0.5 * std::tanh(0.4));
}

TEST(ConvLSTM, ShapesMaskAndForgetBias) {
  const auto g = GridGeometry::global(16, 16);
  const Terrain terrain = toy_terrain(g);
  ConvLSTMModel m(ConvLSTMConfig{.hidden = 4}, g, 34);
  const Tensor& bias = m.params().find("lstm.bias")->value;
  EXPECT_EQ(bias.shape(), (Shape{16, 1, 1}));
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(bias[k], k >= 4 && k < 8 ? 1.0 : 0.0);
  const ModelInput in = toy_input(2, 2, 1, g, terrain.mask, 35);
  Tape tape(false);
  const Tensor y = m.forward(tape, in, terrain).value();
  EXPECT_EQ(y.shape(), (Shape{2, 4, 16, 16}));
  for (std::size_t s = 0; s < 8; ++s)
    for (std::size_t c = 0; c < g.cells(); ++c)
      if (!terrain.mask.ocean(c)) EXPECT_EQ(y[s * g.cells() + c], 0.0);
}

TEST(ConvLSTM, GradientCheckThroughUnroll) {
  const auto g = GridGeometry::global(8, 8);
  const Terrain terrain = toy_terrain(g);
  ConvLSTMModel m(ConvLSTMConfig{.hidden = 3}, g, 36);  // 2 history steps + 1 forced step
  const ModelInput in = toy_input(1, 2, 1, g, terrain.mask, 37);
  CounterRng rng(38);
  const Tensor truth = random_tensor({1, 4, 8, 8}, rng);
  std::vector<Parameter*> ps;
  for (auto& p : m.params()) ps.push_back(&p);
  const double err = grad_check(
      [&](Tape& t) { return masked_loss(m.forward(t, in, terrain), truth, terrain.mask, {1, 1, 1, 1}); }, ps, 1e-5, 12,
      39);
  EXPECT_LT(err, 1e-4);
}

TEST(ConvLSTM, ShortTrainingReducesLoss) {
  const auto g = GridGeometry::global(8, 8);
  const Terrain terrain = toy_terrain(g);
  ConvLSTMModel m(ConvLSTMConfig{.hidden = 4}, g, 40);
  const ModelInput in = toy_input(2, 2, 1, g, terrain.mask, 41);
  // Target: the last history state, a mapping the cell can learn quickly.
  Tensor truth({2, 4, 8, 8});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 4 * 64; ++i) truth[b * 256 + i] = in.waves[(b * 2 + 1) * 256 + i];
  TrainConfig cfg;
  cfg.lr = 1e-2;
  AdamMoments mom = zero_moments(m.params());
  double first = 0.0, last = 0.0;
  for (std::size_t step = 1; step <= 40; ++step) {
    m.params().zero_grad();
    Tape tape;
    Var loss = masked_loss(m.forward(tape, in, terrain), truth, terrain.mask, cfg.weights);
    tape.backward(loss);
    (step == 1 ? first : last) = loss.value().item();
    adam_step(m.params(), mom, cfg, step);
  }
  EXPECT_LT(last, 0.5 * first);
}
