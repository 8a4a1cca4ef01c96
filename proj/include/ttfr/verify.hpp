// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

// Function-preservation metrics between a source and a grown model, plus
// toy evaluation (perplexity, mask filling, top-k accuracy).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "ttfr/config.hpp"
#include "ttfr/growth.hpp"
#include "ttfr/model.hpp"

namespace ttfr {

inline constexpr double kExactLogitTolerance = 1e-4;

struct EquivalenceReport {
  size_t n_sequences = 0;
  double max_abs_logit_diff = 0.0;
  double mean_abs_logit_diff = 0.0;
  double mean_kl = 0.0;  // KL(source || target), nats, averaged over positions
  double argmax_agreement = 1.0;
  EquivalenceClass equivalence_class = EquivalenceClass::kExactModuloLayerNorm;
  // Set when the class is exact but max_abs_logit_diff exceeds
  // kExactLogitTolerance.
  bool failed = false;
};

void to_json(nlohmann::json& j, const EquivalenceReport& r);

// Logits are compared index-aligned at every position of every sequence.
// When claimed is empty the class comes from classify_configs.
EquivalenceReport compare_models(const ModelConfig& src_cfg, const ModelWeights<float>& src_w,
                                 const ModelConfig& tgt_cfg, const ModelWeights<float>& tgt_w,
                                 std::span<const std::vector<int>> seqs,
                                 std::optional<EquivalenceClass> claimed = std::nullopt);

// n sequences of ids uniform over [0, vocab), lengths cycling through
// {1, max_len/2, max_len}.
std::vector<std::vector<int>> make_test_sequences(uint64_t seed, size_t n, size_t vocab_size,
                                                  size_t max_len);

// exp of the token-weighted mean next-token cross entropy over
// non-overlapping windows of max_seq_len (a trailing window of >= 2 tokens
// counts; a single leftover token is dropped).
double perplexity(const ModelConfig& cfg, const ModelWeights<float>& w,
                  std::span<const int> corpus_tokens);

// Replaces tokens[position] with the mask id and ranks ids by logit at that
// position, ties to the lower id. k is clamped to the vocabulary.
std::vector<int> fill_mask_topk(const ModelConfig& cfg, const ModelWeights<float>& w,
                                std::vector<int> tokens, size_t position, size_t k);

struct MaskProbe {
  std::vector<int> tokens;
  size_t position = 0;
  int gold = 0;
};

double topk_accuracy(const ModelConfig& cfg, const ModelWeights<float>& w,
                     std::span<const MaskProbe> probes, size_t k);

}  // namespace ttfr
