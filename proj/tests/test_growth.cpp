// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "test_util.hpp"
#include "ttfr/errors.hpp"
#include "ttfr/growth.hpp"
#include "ttfr/kernels.hpp"
#include "ttfr/verify.hpp"

using ttfr::GrowthPlan;
using ttfr::Matrix;
using ttfr::MatrixD;
using ttfr::ModelConfig;
using ttfr::ModelWeights;

namespace {

GrowthPlan wide_plan(bool ln_enabled) {
  GrowthPlan p;
  p.source_cfg = ttfr::testing::small_decoder();
  p.source_cfg.ln_enabled = ln_enabled;
  p.target_cfg = p.source_cfg;
  p.target_cfg.d_model = 64;
  p.target_cfg.n_heads = 8;
  p.target_cfg.d_ff = 256;
  p.target_cfg.n_layers = 4;
  return p;
}

GrowthPlan widen_heads_plan(bool ln_enabled) {
  GrowthPlan p = wide_plan(ln_enabled);
  p.head_mode = ttfr::HeadMode::kWidenHeads;
  p.target_cfg.n_heads = 4;
  p.target_cfg.d_head = 16;
  return p;
}

double max_logit_diff(const GrowthPlan& p, const ModelWeights<float>& src,
                      const ModelWeights<float>& tgt, uint64_t seed, size_t n = 16) {
  const auto seqs = ttfr::make_test_sequences(seed, n, p.source_cfg.vocab_size,
                                              std::min(p.source_cfg.max_seq_len, p.target_cfg.max_seq_len));
  return ttfr::compare_models(p.source_cfg, src, p.target_cfg, tgt, seqs).max_abs_logit_diff;
}

}  // namespace

TEST_CASE("grow_embedding") {
  const Matrix e = Matrix::FromRows({{0.5f, -0.2f}});
  CHECK(ttfr::grow_embedding(e, 4) == Matrix::FromRows({{0.5f, -0.2f, 0, 0}}));
  CHECK(ttfr::grow_embedding(e, 2) == e);
  CHECK_THROWS_AS(ttfr::grow_embedding(e, 1), ttfr::PlanError);

  // h' = [h; anything] against a padded table gives the source inner products.
  const MatrixD table = MatrixD::FromRows({{1, 2}, {-3, 0.5}});
  const MatrixD grown = ttfr::grow_embedding(table, 4);
  const MatrixD h = MatrixD::FromRows({{0.25, -1}});
  const MatrixD hp = MatrixD::FromRows({{0.25, -1, 123, -9}});
  CHECK(ttfr::matmul_nt(hp, grown) == ttfr::matmul_nt(h, table));
}

TEST_CASE("grow_linear") {
  const MatrixD w = MatrixD::FromRows({{1, 2}, {3, 4}});
  const std::vector<double> b = {1, -1};
  const auto [wp, bp] = ttfr::grow_linear(w, b, 3, 3);
  CHECK(wp == MatrixD::FromRows({{1, 2, 0}, {3, 4, 0}, {0, 0, 0}}));
  CHECK(bp == std::vector<double>{1, -1, 0});
  MatrixD y = ttfr::matmul(wp, MatrixD::FromRows({{5}, {6}, {0}}));
  for (size_t i = 0; i < 3; ++i) y(i, 0) += bp[i];
  CHECK(y == MatrixD::FromRows({{18}, {38}, {0}}));

  const auto [same_w, same_b] = ttfr::grow_linear(w, b, 2, 2);
  CHECK(same_w == w);
  CHECK(same_b == b);

  const auto [w1, b1] = ttfr::grow_linear(w, b, 3, 4);
  const auto [w2, b2] = ttfr::grow_linear(w1, b1, 5, 6);
  const auto [w12, b12] = ttfr::grow_linear(w, b, 5, 6);
  CHECK(w2 == w12);
  CHECK(b2 == b12);

  CHECK_THROWS_AS(ttfr::grow_linear(w, b, 1, 2), ttfr::PlanError);
  CHECK_THROWS_AS(ttfr::grow_linear(w, b, 2, 1), ttfr::PlanError);
}

TEST_CASE("grow_layer_norm") {
  const std::vector<double> g = {1.1, 0.9}, b = {0.2, -0.3};
  const auto [g4, b4] = ttfr::grow_layer_norm(g, b, 4);
  CHECK(g4 == std::vector<double>{1.1, 0.9, 1, 1});
  CHECK(b4 == std::vector<double>{0.2, -0.3, 0, 0});
  const auto [g2, b2] = ttfr::grow_layer_norm(g, b, 2);
  CHECK(g2 == g);
  CHECK(b2 == b);
  CHECK_THROWS_AS(ttfr::grow_layer_norm(g, b, 1), ttfr::PlanError);
}

TEST_CASE("add-heads: new heads contribute nothing") {
  GrowthPlan p = wide_plan(false);
  p.target_cfg.n_layers = p.source_cfg.n_layers;
  ttfr::Rng rng(1);
  const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.3);
  const auto grown = ttfr::grow_model(src, p);
  const std::vector<int> tokens = {4, 8, 15, 16, 23, 42};
  const auto cache = ttfr::forward_cached(p.target_cfg, grown.weights, tokens);
  for (const auto& lc : cache.layers) {
    for (size_t i = 0; i < tokens.size(); ++i) {
      for (size_t c = p.source_cfg.inner_dim(); c < p.target_cfg.inner_dim(); ++c) {
        REQUIRE(lc.ctx(i, c) == 0.0f);
      }
    }
    // Zero scores give uniform causal attention in the new heads.
    for (size_t h = p.source_cfg.n_heads; h < p.target_cfg.n_heads; ++h) {
      for (size_t i = 0; i < tokens.size(); ++i) {
        for (size_t j = 0; j <= i; ++j) {
          CHECK(lc.probs[h](i, j) == doctest::Approx(1.0 / static_cast<double>(i + 1)));
        }
      }
    }
  }
}

TEST_CASE("widen-heads preserves attention probabilities only with compensation") {
  GrowthPlan p;
  p.source_cfg = ttfr::testing::small_decoder();
  p.source_cfg.ln_enabled = false;
  p.source_cfg.n_heads = 2;
  p.source_cfg.d_head = 4;
  p.source_cfg.n_layers = 1;
  p.target_cfg = p.source_cfg;
  p.target_cfg.d_head = 16;
  p.head_mode = ttfr::HeadMode::kWidenHeads;
  ttfr::Rng rng(2);
  const auto src = ttfr::init_random<double>(p.source_cfg, rng, 0.5);
  const std::vector<int> tokens = {1, 50, 99, 7, 3, 250, 11, 12};
  const auto ref = ttfr::forward_cached(p.source_cfg, src, tokens);

  const auto comp = ttfr::grow_model(src, p);
  CHECK(comp.weights.layers[0].q_w(16, 0) == 2.0 * src.layers[0].q_w(4, 0));
  const auto with = ttfr::forward_cached(p.target_cfg, comp.weights, tokens);
  p.scale_compensation = false;
  const auto without = ttfr::forward_cached(p.target_cfg, ttfr::grow_model(src, p).weights, tokens);

  double d_with = 0.0, d_without = 0.0;
  for (size_t h = 0; h < 2; ++h) {
    d_with = std::max(d_with, ttfr::testing::max_abs_diff(ref.layers[0].probs[h], with.layers[0].probs[h]));
    d_without = std::max(d_without, ttfr::testing::max_abs_diff(ref.layers[0].probs[h], without.layers[0].probs[h]));
  }
  CHECK(d_with <= 1e-6);
  CHECK(d_without > 1e-3);
  std::printf("widen-heads 4->16 max prob diff: compensated %.3g, uncompensated %.3g\n", d_with, d_without);
}

TEST_CASE("zero-identity new blocks are exact identities under pre-LN") {
  for (auto init : {ttfr::DepthInit::kZeroIdentity, ttfr::DepthInit::kSmallRandom}) {
    GrowthPlan p;
    p.source_cfg = ttfr::testing::small_decoder();
    p.target_cfg = p.source_cfg;
    p.target_cfg.n_layers = 5;
    p.depth_init = init;
    if (init == ttfr::DepthInit::kSmallRandom) p.small_std = 0.0;
    ttfr::Rng rng(3);
    const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
    const auto grown = ttfr::grow_model(src, p);
    CHECK(grown.equivalence_class == ttfr::EquivalenceClass::kExact);
    const std::vector<int> tokens = {3, 1, 4, 1, 5, 9, 2, 6};
    const auto cache = ttfr::forward_cached(p.target_cfg, grown.weights, tokens);
    for (size_t l = 2; l < 5; ++l) CHECK(cache.layers[l].x_out == cache.layers[l].x_in);
    CHECK(ttfr::forward(p.source_cfg, src, tokens) == cache.logits);
  }
}

TEST_CASE("grow_depth initialization pattern") {
  GrowthPlan p;
  p.source_cfg = ttfr::testing::tiny();
  p.target_cfg = p.source_cfg;
  p.target_cfg.n_layers = 4;
  ttfr::Rng rng(4);
  const auto src = ttfr::init_random<double>(p.source_cfg, rng, 0.5);
  ttfr::Rng r1(9);
  const auto layers = ttfr::grow_depth(src.layers, p, r1);
  REQUIRE(layers.size() == 4);
  CHECK(layers[0] == src.layers[0]);
  CHECK(layers[1] == src.layers[1]);
  for (size_t l = 2; l < 4; ++l) {
    for (double v : layers[l].o_w.values()) CHECK(v == 0.0);
    for (double v : layers[l].ff2_w.values()) CHECK(v == 0.0);
    for (double v : layers[l].ln1_g) CHECK(v == 1.0);
    for (double v : layers[l].ln2_b) CHECK(v == 0.0);
    bool nonzero = false;
    for (double v : layers[l].q_w.values()) nonzero = nonzero || v != 0.0;
    CHECK(nonzero);
  }
  GrowthPlan shrink = p;
  shrink.target_cfg.n_layers = 1;
  ttfr::Rng r2(9);
  CHECK_THROWS_AS(ttfr::grow_depth(src.layers, shrink, r2), ttfr::PlanError);
}

TEST_CASE("small-random new blocks stay close to the identity") {
  GrowthPlan p;
  p.source_cfg = ttfr::testing::small_decoder();
  p.source_cfg.d_model = 64;
  p.source_cfg.n_heads = 8;
  p.source_cfg.d_ff = 256;
  p.target_cfg = p.source_cfg;
  p.target_cfg.n_layers = 4;
  p.depth_init = ttfr::DepthInit::kSmallRandom;
  p.small_std = 0.002;
  ttfr::Rng rng(5);
  const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.1);
  const auto grown = ttfr::grow_model(src, p);
  CHECK(grown.equivalence_class == ttfr::EquivalenceClass::kExactModuloLayerNorm);
  double worst = 0.0;
  for (uint64_t seed = 0; seed < 8; ++seed) {
    const auto seqs = ttfr::make_test_sequences(seed, 3, 256, p.source_cfg.max_seq_len);
    for (const auto& s : seqs) {
      const auto cache = ttfr::forward_cached(p.target_cfg, grown.weights, s);
      for (size_t l = 2; l < 4; ++l) {
        const auto& in = cache.layers[l].x_in;
        const auto& out = cache.layers[l].x_out;
        for (size_t i = 0; i < in.rows(); ++i) {
          double dn = 0.0, xn = 0.0;
          for (size_t c = 0; c < in.cols(); ++c) {
            dn += (out(i, c) - in(i, c)) * (out(i, c) - in(i, c));
            xn += in(i, c) * in(i, c);
          }
          worst = std::max(worst, std::sqrt(dn / xn));
        }
      }
    }
  }
  std::printf("small-random (std 0.002, d_model 64) worst relative block deviation: %.3g\n", worst);
  CHECK(worst > 0.0);
  // Measured about 4e-4; frozen with margin.
  CHECK(worst <= 0.05);
}

TEST_CASE("LN-ablated growth preserves logits") {
  for (auto mode : {ttfr::HeadMode::kAddHeads, ttfr::HeadMode::kWidenHeads}) {
    GrowthPlan p = mode == ttfr::HeadMode::kAddHeads ? wide_plan(false) : widen_heads_plan(false);
    ttfr::Rng rng(6);
    const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
    const auto grown = ttfr::grow_model(src, p);
    CHECK(grown.equivalence_class == ttfr::EquivalenceClass::kExact);
    CHECK(max_logit_diff(p, src, grown.weights, 1, 64) <= 1e-4);
  }
}

TEST_CASE("LN-enabled width growth changes the logits") {
  GrowthPlan p = wide_plan(true);
  ttfr::Rng rng(7);
  const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
  const auto grown = ttfr::grow_model(src, p);
  CHECK(grown.equivalence_class == ttfr::EquivalenceClass::kExactModuloLayerNorm);
  const auto seqs = ttfr::make_test_sequences(2, 16, 256, 16);
  const auto r = ttfr::compare_models(p.source_cfg, src, p.target_cfg, grown.weights, seqs);
  CHECK(r.max_abs_logit_diff > 1e-4);
  CHECK(r.mean_kl > 0.0);
  CHECK(std::isfinite(r.mean_kl));
}

TEST_CASE("new residual dimensions stay silent without LayerNorm") {
  GrowthPlan p = wide_plan(false);
  p.target_cfg.max_seq_len = 24;
  ttfr::Rng rng(8);
  const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.3);
  const auto grown = ttfr::grow_model(src, p);
  const auto seqs = ttfr::make_test_sequences(3, 6, 256, 16);
  for (const auto& s : seqs) {
    const auto cache = ttfr::forward_cached(p.target_cfg, grown.weights, s);
    auto silent = [&](const Matrix& m) {
      for (size_t i = 0; i < m.rows(); ++i) {
        for (size_t c = p.source_cfg.d_model; c < p.target_cfg.d_model; ++c) {
          if (m(i, c) != 0.0f) return false;
        }
      }
      return true;
    };
    CHECK(silent(cache.x0));
    for (const auto& lc : cache.layers) {
      CHECK(silent(lc.x_in));
      CHECK(silent(lc.x_mid));
      CHECK(silent(lc.x_out));
    }
  }
}

TEST_CASE("both head modes preserve LN-ablated logits on the same target") {
  GrowthPlan add;
  add.source_cfg = ttfr::testing::small_decoder();
  add.source_cfg.ln_enabled = false;
  add.source_cfg.n_heads = 2;
  add.source_cfg.d_head = 8;
  add.target_cfg = add.source_cfg;
  add.target_cfg.d_model = 48;
  add.target_cfg.n_heads = 4;
  GrowthPlan widen = add;
  widen.head_mode = ttfr::HeadMode::kWidenHeads;
  widen.target_cfg.n_heads = 2;
  widen.target_cfg.d_head = 16;
  REQUIRE(add.target_cfg.inner_dim() == widen.target_cfg.inner_dim());
  ttfr::Rng rng(9);
  const auto src = ttfr::init_random<float>(add.source_cfg, rng, 0.2);
  const auto a = ttfr::grow_model(src, add);
  const auto b = ttfr::grow_model(src, widen);
  CHECK(max_logit_diff(add, src, a.weights, 4) <= 1e-4);
  CHECK(max_logit_diff(widen, src, b.weights, 4) <= 1e-4);
  CHECK_FALSE(a.weights == b.weights);
}

TEST_CASE("random LN-ablated plans preserve logits") {
  ttfr::Rng rng(10);
  for (int trial = 0; trial < 40; ++trial) {
    GrowthPlan p;
    ModelConfig& s = p.source_cfg;
    s.vocab_size = 20 + rng.below(40);
    s.max_seq_len = 2 + rng.below(8);
    s.d_model = 2 + rng.below(10);
    s.n_layers = 1 + rng.below(3);
    s.n_heads = 1 + rng.below(3);
    s.d_head = 1 + rng.below(5);
    s.d_ff = 1 + rng.below(12);
    s.ln_enabled = false;
    s.ln_mode = rng.below(2) == 0 ? ttfr::LnMode::kPre : ttfr::LnMode::kPost;
    s.tie_lm_head = rng.below(2) == 0;
    if (rng.below(3) == 0) {
      s.arch = ttfr::Arch::kEncoderBidirectional;
      s.use_token_type = rng.below(2) == 0;
    }
    ModelConfig& t = p.target_cfg;
    t = s;
    t.max_seq_len += rng.below(4);
    t.d_model += rng.below(8);
    t.n_layers += rng.below(3);
    t.d_ff += rng.below(12);
    p.head_mode = rng.below(2) == 0 ? ttfr::HeadMode::kAddHeads : ttfr::HeadMode::kWidenHeads;
    if (p.head_mode == ttfr::HeadMode::kAddHeads) {
      t.n_heads += rng.below(3);
    } else {
      t.d_head += rng.below(5);
    }
    p.new_pos_init = rng.below(2) == 0 ? ttfr::PosInit::kZeros : ttfr::PosInit::kSmallRandom;
    p.seed = rng.next_u64();
    CAPTURE(trial);
    const auto src = ttfr::init_random<float>(s, rng, 0.3);
    const auto grown = ttfr::grow_model(src, p);
    CHECK(grown.equivalence_class == ttfr::EquivalenceClass::kExact);
    CHECK(max_logit_diff(p, src, grown.weights, static_cast<uint64_t>(trial), 6) <= 1e-4);
  }
}

TEST_CASE("identity plan is a bitwise fixpoint") {
  for (bool ln : {true, false}) {
    GrowthPlan p;
    p.source_cfg = ttfr::testing::small_decoder();
    p.source_cfg.ln_enabled = ln;
    p.source_cfg.tie_lm_head = false;
    p.target_cfg = p.source_cfg;
    ttfr::Rng rng(11);
    const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
    const auto grown = ttfr::grow_model(src, p);
    CHECK(grown.weights == src);
    CHECK(grown.equivalence_class == ttfr::EquivalenceClass::kExact);
  }
}

TEST_CASE("grow_model is deterministic") {
  GrowthPlan p = wide_plan(true);
  p.depth_init = ttfr::DepthInit::kSmallRandom;
  p.target_cfg.max_seq_len = 32;
  p.new_pos_init = ttfr::PosInit::kSmallRandom;
  p.seed = 77;
  ttfr::Rng rng(12);
  const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
  CHECK(ttfr::grow_model(src, p).weights == ttfr::grow_model(src, p).weights);
  GrowthPlan q = p;
  q.seed = 78;
  CHECK_FALSE(ttfr::grow_model(src, p).weights == ttfr::grow_model(src, q).weights);
}

TEST_CASE("plan validation") {
  auto expect_plan_error = [](const GrowthPlan& p, const std::string& fragment) {
    try {
      p.validate();
      FAIL("expected PlanError containing: " << fragment);
    } catch (const ttfr::PlanError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  const GrowthPlan base = wide_plan(true);
  CHECK_NOTHROW(base.validate());

  GrowthPlan shrink = base;
  shrink.target_cfg.d_model = 16;
  expect_plan_error(shrink, "target dims must dominate source: d_model 32 -> 16");
  GrowthPlan fewer = base;
  fewer.target_cfg.n_layers = 1;
  expect_plan_error(fewer, "target dims must dominate source: n_layers");
  GrowthPlan vocab = base;
  vocab.target_cfg.vocab_size = 300;
  expect_plan_error(vocab, "vocab");
  GrowthPlan arch = base;
  arch.target_cfg.arch = ttfr::Arch::kEncoderBidirectional;
  expect_plan_error(arch, "arch");
  GrowthPlan mode = base;
  mode.target_cfg.ln_mode = ttfr::LnMode::kPost;
  expect_plan_error(mode, "ln_mode");
  GrowthPlan add = base;
  add.target_cfg.d_head = 16;
  expect_plan_error(add, "add-heads");
  GrowthPlan widen = widen_heads_plan(true);
  CHECK_NOTHROW(widen.validate());
  widen.target_cfg.n_heads = 8;
  expect_plan_error(widen, "widen-heads");
  GrowthPlan neg = base;
  neg.small_std = -1.0;
  expect_plan_error(neg, "small_std");
}

TEST_CASE("grow_model rejects weights that do not match the plan") {
  GrowthPlan p = wide_plan(true);
  ModelConfig other = p.source_cfg;
  other.d_ff = 64;
  const auto w = ModelWeights<float>::Zeros(other);
  try {
    ttfr::grow_model(w, p);
    FAIL("expected PlanError");
  } catch (const ttfr::PlanError& e) {
    CHECK(std::string(e.what()).find("ff1") != std::string::npos);
  }
}

TEST_CASE("equivalence classification") {
  using ttfr::EquivalenceClass;
  GrowthPlan p = wide_plan(false);
  CHECK(ttfr::classify(p) == EquivalenceClass::kExact);
  p.depth_init = ttfr::DepthInit::kSmallRandom;
  CHECK(ttfr::classify(p) == EquivalenceClass::kExactModuloLayerNorm);
  p.small_std = 0.0;
  CHECK(ttfr::classify(p) == EquivalenceClass::kExact);

  CHECK(ttfr::classify(wide_plan(true)) == EquivalenceClass::kExactModuloLayerNorm);
  GrowthPlan uncompensated = widen_heads_plan(false);
  uncompensated.scale_compensation = false;
  CHECK(ttfr::classify(uncompensated) == EquivalenceClass::kExactModuloLayerNorm);

  GrowthPlan depth;
  depth.source_cfg = ttfr::testing::small_decoder();
  depth.target_cfg = depth.source_cfg;
  depth.target_cfg.n_layers = 4;
  CHECK(ttfr::classify(depth) == EquivalenceClass::kExact);
  depth.source_cfg.ln_mode = depth.target_cfg.ln_mode = ttfr::LnMode::kPost;
  CHECK(ttfr::classify(depth) == EquivalenceClass::kExactModuloLayerNorm);
  GrowthPlan ffn = depth;
  ffn.source_cfg.ln_mode = ffn.target_cfg.ln_mode = ttfr::LnMode::kPre;
  ffn.target_cfg.n_layers = 2;
  ffn.target_cfg.d_ff = 512;
  ffn.target_cfg.n_heads = 8;
  CHECK(ttfr::classify(ffn) == EquivalenceClass::kExact);
}

TEST_CASE("depth-only pre-LN growth and FFN/head growth at fixed width are exact with LN on") {
  GrowthPlan p;
  p.source_cfg = ttfr::testing::small_decoder();
  p.target_cfg = p.source_cfg;
  p.target_cfg.n_layers = 4;
  p.target_cfg.d_ff = 512;
  p.target_cfg.n_heads = 8;
  ttfr::Rng rng(13);
  const auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
  const auto grown = ttfr::grow_model(src, p);
  CHECK(max_logit_diff(p, src, grown.weights, 5, 32) <= 1e-5);
}

TEST_CASE("post-LN depth growth deviates only through the LayerNorm epsilon") {
  GrowthPlan p;
  p.source_cfg = ttfr::testing::small_decoder();
  p.source_cfg.ln_mode = ttfr::LnMode::kPost;
  p.target_cfg = p.source_cfg;
  p.target_cfg.n_layers = 3;
  ttfr::Rng rng(14);
  auto src = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
  // Non-trivial final LN so renormalization is visible.
  for (size_t i = 0; i < src.final_ln_gain.size(); ++i) src.final_ln_gain[i] = 1.0f + 0.1f * static_cast<float>(i % 3);
  for (auto& l : src.layers) {
    for (size_t i = 0; i < l.ln2_b.size(); ++i) l.ln2_b[i] = 0.3f * static_cast<float>(i % 5);
  }
  const auto grown = ttfr::grow_model(src, p);
  CHECK(grown.equivalence_class == ttfr::EquivalenceClass::kExactModuloLayerNorm);
  // New blocks renormalize the stream, which the final LN absorbs except for
  // the eps term.
  const double d = max_logit_diff(p, src, grown.weights, 6);
  CHECK(d > 0.0);
  CHECK(d < 1e-3);
}

TEST_CASE("plan JSON round trip and defaults") {
  GrowthPlan p = widen_heads_plan(true);
  p.depth_init = ttfr::DepthInit::kSmallRandom;
  p.small_std = 0.01;
  p.new_pos_init = ttfr::PosInit::kSmallRandom;
  p.seed = 123;
  p.scale_compensation = false;
  const nlohmann::json j = p;
  const GrowthPlan q = j.get<GrowthPlan>();
  CHECK(nlohmann::json(q) == j);
  CHECK(j["head_mode"] == "widen-heads");

  nlohmann::json minimal = {{"source_cfg", p.source_cfg}, {"target_cfg", p.target_cfg}};
  const GrowthPlan d = minimal.get<GrowthPlan>();
  CHECK(d.head_mode == ttfr::HeadMode::kAddHeads);
  CHECK(d.scale_compensation);
  CHECK(d.depth_init == ttfr::DepthInit::kZeroIdentity);
  CHECK(d.small_std == 0.002);
  CHECK(d.new_pos_init == ttfr::PosInit::kZeros);

  nlohmann::json bad = j;
  bad["head_mode"] = "split-heads";
  CHECK_THROWS_AS(bad.get<GrowthPlan>(), ttfr::PlanError);
}
