// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttfr/verify.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "ttfr/errors.hpp"
#include "ttfr/rng.hpp"

namespace ttfr {

namespace {

struct PartialStats {
  double max_abs = 0.0;
  double sum_abs = 0.0;
  double sum_kl = 0.0;
  size_t n_logits = 0;
  size_t n_positions = 0;
  size_t n_agree = 0;
};

size_t argmax(std::span<const float> row) {
  size_t best = 0;
  for (size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

double log_sum_exp(std::span<const float> row) {
  double max = row[0];
  for (float v : row) max = std::max(max, static_cast<double>(v));
  double sum = 0.0;
  for (float v : row) sum += std::exp(static_cast<double>(v) - max);
  return max + std::log(sum);
}

PartialStats compare_sequence(const ModelConfig& src_cfg, const ModelWeights<float>& src_w,
                              const ModelConfig& tgt_cfg, const ModelWeights<float>& tgt_w,
                              std::span<const int> seq) {
  const auto a = forward(src_cfg, src_w, seq);
  const auto b = forward(tgt_cfg, tgt_w, seq);
  PartialStats s;
  for (size_t i = 0; i < a.rows(); ++i) {
    const auto ra = a.row(i);
    const auto rb = b.row(i);
    const double lse_a = log_sum_exp(ra);
    const double lse_b = log_sum_exp(rb);
    double kl = 0.0;
    for (size_t j = 0; j < ra.size(); ++j) {
      const double d = std::abs(static_cast<double>(ra[j]) - static_cast<double>(rb[j]));
      s.max_abs = std::max(s.max_abs, d);
      s.sum_abs += d;
      const double log_p = ra[j] - lse_a;
      const double log_q = rb[j] - lse_b;
      kl += std::exp(log_p) * (log_p - log_q);
    }
    s.sum_kl += std::max(kl, 0.0);
    s.n_logits += ra.size();
    s.n_positions += 1;
    s.n_agree += argmax(ra) == argmax(rb) ? 1 : 0;
  }
  return s;
}

}  // namespace

void to_json(nlohmann::json& j, const EquivalenceReport& r) {
  j = nlohmann::json{
      {"n_sequences", r.n_sequences},
      {"max_abs_logit_diff", r.max_abs_logit_diff},
      {"mean_abs_logit_diff", r.mean_abs_logit_diff},
      {"mean_kl", r.mean_kl},
      {"argmax_agreement", r.argmax_agreement},
      {"equivalence_class", std::string(to_string(r.equivalence_class))},
      {"status", r.failed ? "FAILED" : "ok"},
  };
}

EquivalenceReport compare_models(const ModelConfig& src_cfg, const ModelWeights<float>& src_w,
                                 const ModelConfig& tgt_cfg, const ModelWeights<float>& tgt_w,
                                 std::span<const std::vector<int>> seqs,
                                 std::optional<EquivalenceClass> claimed) {
  if (src_cfg.vocab_size != tgt_cfg.vocab_size) {
    throw InputError("compare_models: vocab_size differs (" + std::to_string(src_cfg.vocab_size) +
                     " vs " + std::to_string(tgt_cfg.vocab_size) + ")");
  }
  if (seqs.empty()) throw InputError("compare_models: no test sequences");
  for (const auto& s : seqs) {
    if (s.empty()) throw InputError("compare_models: empty test sequence");
    check_tokens(src_cfg, s);
    check_tokens(tgt_cfg, s);
  }

  std::vector<PartialStats> parts(seqs.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < seqs.size(); ++i) {
    try {
      parts[i] = compare_sequence(src_cfg, src_w, tgt_cfg, tgt_w, seqs[i]);
    } catch (...) {
#pragma omp critical
      error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  // Reduced in sequence-index order.
  PartialStats total;
  for (const auto& p : parts) {
    total.max_abs = std::max(total.max_abs, p.max_abs);
    total.sum_abs += p.sum_abs;
    total.sum_kl += p.sum_kl;
    total.n_logits += p.n_logits;
    total.n_positions += p.n_positions;
    total.n_agree += p.n_agree;
  }
  EquivalenceReport r;
  r.n_sequences = seqs.size();
  r.max_abs_logit_diff = total.max_abs;
  r.mean_abs_logit_diff = total.sum_abs / static_cast<double>(total.n_logits);
  r.mean_kl = total.sum_kl / static_cast<double>(total.n_positions);
  r.argmax_agreement =
      static_cast<double>(total.n_agree) / static_cast<double>(total.n_positions);
  r.equivalence_class = claimed.value_or(classify_configs(src_cfg, tgt_cfg));
  r.failed = r.equivalence_class == EquivalenceClass::kExact &&
             !(r.max_abs_logit_diff <= kExactLogitTolerance);
  return r;
}

std::vector<std::vector<int>> make_test_sequences(uint64_t seed, size_t n, size_t vocab_size,
                                                  size_t max_len) {
  if (vocab_size == 0 || max_len == 0) throw ParameterError("make_test_sequences: empty domain");
  const size_t lengths[3] = {1, std::max<size_t>(1, max_len / 2), max_len};
  Rng rng(seed);
  std::vector<std::vector<int>> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i].resize(lengths[i % 3]);
    for (int& t : out[i]) t = static_cast<int>(rng.below(vocab_size));
  }
  return out;
}

double perplexity(const ModelConfig& cfg, const ModelWeights<float>& w,
                  std::span<const int> corpus_tokens) {
  if (corpus_tokens.size() < 2) throw InputError("perplexity: corpus needs at least 2 tokens");
  const size_t window = cfg.max_seq_len;
  double total = 0.0;
  size_t count = 0;
  for (size_t start = 0; start + 1 < corpus_tokens.size(); start += window) {
    const size_t len = std::min(window, corpus_tokens.size() - start);
    if (len < 2) break;
    const auto seq = corpus_tokens.subspan(start, len);
    const auto logits = forward(cfg, w, seq);
    for (size_t i = 0; i + 1 < len; ++i) {
      total += cross_entropy<float>(logits.row(i), static_cast<size_t>(seq[i + 1]));
    }
    count += len - 1;
  }
  return std::exp(total / static_cast<double>(count));
}

std::vector<int> fill_mask_topk(const ModelConfig& cfg, const ModelWeights<float>& w,
                                std::vector<int> tokens, size_t position, size_t k) {
  if (!cfg.is_encoder()) throw InputError("fill-mask: encoder required");
  if (position >= tokens.size()) {
    throw InputError("fill-mask: position " + std::to_string(position) + " out of range");
  }
  if (k == 0) throw InputError("fill-mask: k must be >= 1");
  tokens[position] = static_cast<int>(cfg.mask_id());
  const auto logits = forward(cfg, w, tokens);
  const auto row = logits.row(position);
  std::vector<int> ids(cfg.vocab_size);
  std::iota(ids.begin(), ids.end(), 0);
  const size_t kk = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(kk), ids.end(),
                    [&](int a, int b) {
                      return row[a] > row[b] || (row[a] == row[b] && a < b);
                    });
  ids.resize(kk);
  return ids;
}

double topk_accuracy(const ModelConfig& cfg, const ModelWeights<float>& w,
                     std::span<const MaskProbe> probes, size_t k) {
  if (probes.empty()) throw InputError("topk_accuracy: no probes");
  size_t hits = 0;
  for (const auto& p : probes) {
    const auto top = fill_mask_topk(cfg, w, p.tokens, p.position, k);
    if (std::find(top.begin(), top.end(), p.gold) != top.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probes.size());
}

}  // namespace ttfr
