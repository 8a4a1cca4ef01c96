// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_util.hpp"
#include "ttfr/errors.hpp"
#include "ttfr/growth.hpp"
#include "ttfr/trainer.hpp"
#include "ttfr/verify.hpp"

using ttfr::EquivalenceClass;
using ttfr::ModelConfig;
using ttfr::ModelWeights;

namespace {

ModelConfig encoder(size_t vocab) {
  ModelConfig c = ttfr::testing::small_decoder();
  c.arch = ttfr::Arch::kEncoderBidirectional;
  c.vocab_size = vocab;
  c.max_seq_len = 8;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.n_layers = 1;
  return c;
}

// Encoder trained with masked-token prediction on "a b a b ...".
std::pair<ModelConfig, ModelWeights<float>> train_abab_encoder() {
  const ttfr::CharTokenizer tok(true);
  ModelConfig c = encoder(tok.vocab_size());
  ttfr::Rng rng(1);
  auto w = ttfr::init_random<float>(c, rng, 0.05);
  auto state = ttfr::OptimizerState<float>::Init(c);
  ttfr::TrainConfig t;
  t.lr = 1e-2;
  std::string text;
  for (int i = 0; i < 8; ++i) text += "a b ";
  const auto ids = tok.encode(text);
  for (int step = 0; step < 300; ++step) {
    const size_t start = rng.below(2) * 4;  // windows begin with 'a'
    std::vector<int> window(ids.begin() + static_cast<std::ptrdiff_t>(start),
                            ids.begin() + static_cast<std::ptrdiff_t>(start + c.max_seq_len));
    const size_t pos = rng.below(c.max_seq_len);
    const std::vector<size_t> positions = {pos};
    const std::vector<int> originals = {window[pos]};
    window[pos] = tok.mask_id();
    auto g = ttfr::mlm_backward(c, w, window, positions, originals);
    ttfr::adam_step(c, w, std::move(g.grads), state, t);
  }
  return {c, w};
}

}  // namespace

TEST_CASE("a model compared with itself") {
  const auto c = ttfr::testing::small_decoder();
  ttfr::Rng rng(1);
  const auto w = ttfr::init_random<float>(c, rng, 0.2);
  const auto seqs = ttfr::make_test_sequences(1, 12, c.vocab_size, c.max_seq_len);
  const auto r = ttfr::compare_models(c, w, c, w, seqs);
  CHECK(r.n_sequences == 12);
  CHECK(r.max_abs_logit_diff == 0.0);
  CHECK(r.mean_abs_logit_diff == 0.0);
  CHECK(r.mean_kl == 0.0);
  CHECK(r.argmax_agreement == 1.0);
  CHECK(r.equivalence_class == EquivalenceClass::kExact);
  CHECK_FALSE(r.failed);
}

TEST_CASE("KL is directional, absolute differences are symmetric") {
  // vocab 2, d_model 1, empty blocks: logits at position 0 are tok_emb[t] * tok_emb^T.
  ModelConfig c;
  c.vocab_size = 2;
  c.max_seq_len = 1;
  c.d_model = 1;
  c.n_layers = 1;
  c.n_heads = 1;
  c.d_head = 1;
  c.d_ff = 1;
  c.ln_enabled = false;
  const auto flat = ModelWeights<double>::Zeros(c);
  auto peaked = flat;
  peaked.tok_emb = ttfr::MatrixD::FromRows({{1}, {0}});
  const auto fw = ttfr::cast_weights<float>(flat);
  const auto pw = ttfr::cast_weights<float>(peaked);
  const std::vector<std::vector<int>> seqs = {{0}};
  const auto ab = ttfr::compare_models(c, fw, c, pw, seqs);
  const auto ba = ttfr::compare_models(c, pw, c, fw, seqs);

  const double e = std::exp(1.0);
  const double p0 = e / (e + 1.0), p1 = 1.0 / (e + 1.0);
  const double kl_uniform_peaked = 0.5 * std::log(0.5 / p0) + 0.5 * std::log(0.5 / p1);
  const double kl_peaked_uniform = p0 * std::log(p0 / 0.5) + p1 * std::log(p1 / 0.5);
  CHECK(ab.mean_kl == doctest::Approx(kl_uniform_peaked).epsilon(1e-6));
  CHECK(ba.mean_kl == doctest::Approx(kl_peaked_uniform).epsilon(1e-6));
  CHECK(ab.mean_kl != doctest::Approx(ba.mean_kl).epsilon(1e-3));
  CHECK(ab.max_abs_logit_diff == ba.max_abs_logit_diff);
  CHECK(ab.mean_abs_logit_diff == ba.mean_abs_logit_diff);
  CHECK(ab.max_abs_logit_diff == doctest::Approx(1.0));
  CHECK(ab.mean_abs_logit_diff == doctest::Approx(0.5));
  // Flat logits: argmax is id 0 for both.
  CHECK(ab.argmax_agreement == 1.0);
}

TEST_CASE("small perturbations below half the runner-up gap keep every argmax") {
  const auto c = ttfr::testing::small_decoder();
  ttfr::Rng rng(2);
  const auto w = ttfr::init_random<float>(c, rng, 0.3);
  const auto seqs = ttfr::make_test_sequences(3, 20, c.vocab_size, c.max_seq_len);
  double min_gap = 1e30;
  for (const auto& s : seqs) {
    const auto logits = ttfr::forward(c, w, s);
    for (size_t i = 0; i < logits.rows(); ++i) {
      std::vector<float> row(logits.row(i).begin(), logits.row(i).end());
      std::partial_sort(row.begin(), row.begin() + 2, row.end(), std::greater<>());
      min_gap = std::min(min_gap, static_cast<double>(row[0] - row[1]));
    }
  }
  REQUIRE(min_gap > 0.0);
  auto t = w;
  for (float& v : t.final_ln_bias) v += 1e-6f;
  for (float& v : t.tok_emb.values()) v *= 1.0f + 1e-6f;
  const auto r = ttfr::compare_models(c, w, c, t, seqs);
  REQUIRE(r.max_abs_logit_diff > 0.0);
  REQUIRE(r.max_abs_logit_diff < min_gap / 2.0);
  CHECK(r.argmax_agreement == 1.0);
}

TEST_CASE("an exact claim beyond tolerance is flagged") {
  const auto c = ttfr::testing::small_decoder();
  ttfr::Rng rng(4);
  const auto w = ttfr::init_random<float>(c, rng, 0.2);
  auto t = w;
  t.tok_emb(5, 3) += 0.5f;
  const auto seqs = ttfr::make_test_sequences(1, 8, c.vocab_size, c.max_seq_len);
  const auto r = ttfr::compare_models(c, w, c, t, seqs, EquivalenceClass::kExact);
  CHECK(r.failed);
  CHECK(nlohmann::json(r)["status"] == "FAILED");
  const auto ok = ttfr::compare_models(c, w, c, t, seqs, EquivalenceClass::kExactModuloLayerNorm);
  CHECK_FALSE(ok.failed);
  CHECK(nlohmann::json(ok)["status"] == "ok");
  CHECK(nlohmann::json(ok)["equivalence_class"] == "exact-modulo-layernorm");
  for (const char* key : {"n_sequences", "max_abs_logit_diff", "mean_abs_logit_diff", "mean_kl",
                          "argmax_agreement"}) {
    CHECK(nlohmann::json(ok).contains(key));
  }
}

TEST_CASE("compare_models input checks") {
  auto c = ttfr::testing::small_decoder();
  const auto w = ModelWeights<float>::Zeros(c);
  auto d = c;
  d.vocab_size = 128;
  const auto u = ModelWeights<float>::Zeros(d);
  const std::vector<std::vector<int>> seqs = {{1, 2}};
  CHECK_THROWS_AS(ttfr::compare_models(c, w, d, u, seqs), ttfr::InputError);
  const std::vector<std::vector<int>> none;
  CHECK_THROWS_AS(ttfr::compare_models(c, w, c, w, none), ttfr::InputError);
}

TEST_CASE("test sequences") {
  const auto a = ttfr::make_test_sequences(5, 7, 50, 10);
  CHECK(a == ttfr::make_test_sequences(5, 7, 50, 10));
  CHECK_FALSE(a == ttfr::make_test_sequences(6, 7, 50, 10));
  const size_t want[] = {1, 5, 10, 1, 5, 10, 1};
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].size() == want[i]);
    for (int t : a[i]) CHECK((t >= 0 && t < 50));
  }
}

TEST_CASE("reports are deterministic") {
  ttfr::GrowthPlan p;
  p.source_cfg = ttfr::testing::small_decoder();
  p.target_cfg = p.source_cfg;
  p.target_cfg.d_model = 48;
  ttfr::Rng rng(6);
  const auto w = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
  const auto g = ttfr::grow_model(w, p);
  const auto seqs = ttfr::make_test_sequences(2, 30, 256, 16);
  const auto a = ttfr::compare_models(p.source_cfg, w, p.target_cfg, g.weights, seqs);
  const auto b = ttfr::compare_models(p.source_cfg, w, p.target_cfg, g.weights, seqs);
  CHECK(nlohmann::json(a).dump() == nlohmann::json(b).dump());
  CHECK(a.mean_kl > 0.0);
  CHECK(a.argmax_agreement <= 1.0);
  CHECK(a.equivalence_class == EquivalenceClass::kExactModuloLayerNorm);
}

TEST_CASE("perplexity") {
  ModelConfig c = ttfr::testing::small_decoder();
  c.vocab_size = 16;
  const auto zero = ModelWeights<float>::Zeros(c);
  std::vector<int> corpus(100);
  for (size_t i = 0; i < corpus.size(); ++i) corpus[i] = static_cast<int>((i * 7) % 16);
  CHECK(std::abs(ttfr::perplexity(c, zero, corpus) - 16.0) <= 0.01);

  ttfr::Rng rng(7);
  const auto w = ttfr::init_random<float>(c, rng, 0.3);
  const std::vector<int> window(corpus.begin(), corpus.begin() + 16);
  CHECK(ttfr::perplexity(c, w, window) ==
        doctest::Approx(std::exp(ttfr::lm_loss(c, w, window))).epsilon(1e-9));

  const std::vector<int> one = {3};
  CHECK_THROWS_AS(ttfr::perplexity(c, w, one), ttfr::InputError);
  CHECK_THROWS_AS(ttfr::perplexity(c, w, std::vector<int>{}), ttfr::InputError);
}

TEST_CASE("LN-ablated growth keeps perplexity") {
  ttfr::GrowthPlan p;
  p.source_cfg = ttfr::testing::small_decoder();
  p.source_cfg.ln_enabled = false;
  p.target_cfg = p.source_cfg;
  p.target_cfg.d_model = 64;
  p.target_cfg.n_layers = 3;
  p.target_cfg.n_heads = 6;
  ttfr::Rng rng(8);
  const auto w = ttfr::init_random<float>(p.source_cfg, rng, 0.2);
  const auto g = ttfr::grow_model(w, p);
  std::vector<int> corpus(300);
  for (int& t : corpus) t = static_cast<int>(rng.below(256));
  const double a = ttfr::perplexity(p.source_cfg, w, corpus);
  const double b = ttfr::perplexity(p.target_cfg, g.weights, corpus);
  CHECK(std::abs(a - b) / a <= 1e-3);
}

TEST_CASE("fill-mask on a toy encoder") {
  const auto [c, w] = train_abab_encoder();
  const ttfr::CharTokenizer tok(true);
  const auto tokens = tok.encode("a b a b ");
  // Position 4 holds the 'a' in front of " b".
  const auto top = ttfr::fill_mask_topk(c, w, tokens, 4, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0] == 'a');
  CHECK(ttfr::fill_mask_topk(c, w, tokens, 2, 1)[0] == 'b');
  CHECK(ttfr::fill_mask_topk(c, w, tokens, 1, 1)[0] == ' ');

  const std::vector<ttfr::MaskProbe> probes = {
      {tokens, 0, 'a'}, {tokens, 2, 'b'}, {tokens, 3, ' '}, {tokens, 4, 'a'}};
  CHECK(ttfr::topk_accuracy(c, w, probes, 1) == 1.0);

  // LN-ablated growth cannot apply here (LN is on), so compare the same
  // model grown at fixed width: depth-only pre-LN growth is exact.
  ttfr::GrowthPlan p;
  p.source_cfg = c;
  p.target_cfg = c;
  p.target_cfg.n_layers = 3;
  p.target_cfg.d_ff = 64;
  const auto g = ttfr::grow_model(w, p);
  for (size_t pos = 0; pos < tokens.size(); ++pos) {
    CHECK(ttfr::fill_mask_topk(c, w, tokens, pos, 5) ==
          ttfr::fill_mask_topk(p.target_cfg, g.weights, tokens, pos, 5));
  }
}

TEST_CASE("LN-ablated grown encoder ranks identically") {
  ModelConfig c = encoder(40);
  c.ln_enabled = false;
  ttfr::Rng rng(9);
  const auto w = ttfr::init_random<float>(c, rng, 0.3);
  ttfr::GrowthPlan p;
  p.source_cfg = c;
  p.target_cfg = c;
  p.target_cfg.d_model = 32;
  p.target_cfg.n_heads = 4;
  p.target_cfg.n_layers = 2;
  const auto g = ttfr::grow_model(w, p);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> t(c.max_seq_len);
    for (int& x : t) x = static_cast<int>(rng.below(39));
    const size_t pos = rng.below(t.size());
    CHECK(ttfr::fill_mask_topk(c, w, t, pos, 5) == ttfr::fill_mask_topk(p.target_cfg, g.weights, t, pos, 5));
  }
}

TEST_CASE("fill-mask contract") {
  ModelConfig c = encoder(12);
  const auto zero = ModelWeights<float>::Zeros(c);
  const std::vector<int> t = {1, 2, 3};
  std::vector<int> all(12);
  std::iota(all.begin(), all.end(), 0);
  CHECK(ttfr::fill_mask_topk(c, zero, t, 1, 50) == all);
  CHECK_THROWS_AS(ttfr::fill_mask_topk(c, zero, t, 3, 1), ttfr::InputError);
  CHECK_THROWS_AS(ttfr::fill_mask_topk(c, zero, t, 0, 0), ttfr::InputError);
  ModelConfig d = c;
  d.arch = ttfr::Arch::kDecoderCausal;
  try {
    ttfr::fill_mask_topk(d, ModelWeights<float>::Zeros(d), t, 0, 1);
    FAIL("expected InputError");
  } catch (const ttfr::InputError& e) {
    CHECK(std::string(e.what()).find("encoder required") != std::string::npos);
  }
  const std::vector<ttfr::MaskProbe> none;
  CHECK_THROWS_AS(ttfr::topk_accuracy(c, zero, none, 1), ttfr::InputError);
}

TEST_CASE("top-1 accuracy of a random model is about 1/V") {
  ModelConfig c = encoder(16);
  ttfr::Rng rng(10);
  const auto w = ttfr::init_random<float>(c, rng, 0.5);
  std::vector<ttfr::MaskProbe> probes(4000);
  for (auto& p : probes) {
    p.tokens.resize(1 + rng.below(c.max_seq_len));
    for (int& x : p.tokens) x = static_cast<int>(rng.below(15));
    p.position = rng.below(p.tokens.size());
    p.gold = static_cast<int>(rng.below(16));
  }
  const double acc = ttfr::topk_accuracy(c, w, probes, 1);
  CHECK(std::abs(acc - 1.0 / 16.0) <= 0.015);

  // Gold at the argmax always hits.
  for (auto& p : probes) p.gold = ttfr::fill_mask_topk(c, w, p.tokens, p.position, 1)[0];
  CHECK(ttfr::topk_accuracy(c, w, probes, 1) == 1.0);
}
