// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal GPT-style (decoder-causal) and BERT-style (encoder-bidirectional)
// transformer. Weights are plain value types; forward passes are pure.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ttfr/config.hpp"
#include "ttfr/matrix.hpp"
#include "ttfr/rng.hpp"

namespace ttfr {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kMaskValue = -1e9;

// Linear weights are stored (out x in), so a projection is x * W^T + b.
template <typename T>
struct LayerWeights {
  BasicMatrix<T> q_w, k_w, v_w;  // inner x d_model
  std::vector<T> q_b, k_b, v_b;  // inner
  BasicMatrix<T> o_w;            // d_model x inner
  std::vector<T> o_b;            // d_model
  std::vector<T> ln1_g, ln1_b;   // d_model
  BasicMatrix<T> ff1_w;          // d_ff x d_model
  std::vector<T> ff1_b;          // d_ff
  BasicMatrix<T> ff2_w;          // d_model x d_ff
  std::vector<T> ff2_b;          // d_model
  std::vector<T> ln2_g, ln2_b;   // d_model

  // Shaped for cfg; matrices and biases zero, LN gains one.
  static LayerWeights Zeros(const ModelConfig& cfg);

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

template <typename T>
struct ModelWeights {
  BasicMatrix<T> tok_emb;   // vocab x d_model
  BasicMatrix<T> pos_emb;   // max_seq_len x d_model
  BasicMatrix<T> type_emb;  // 2 x d_model when cfg.has_type_emb(), else empty
  std::vector<LayerWeights<T>> layers;
  std::vector<T> final_ln_gain, final_ln_bias;
  BasicMatrix<T> lm_head;  // vocab x d_model; empty when the head is tied

  // The matrix logits are computed against. A tied head has no storage of
  // its own, so it can never drift from tok_emb.
  const BasicMatrix<T>& head(const ModelConfig& cfg) const {
    return cfg.tie_lm_head ? tok_emb : lm_head;
  }

  // All tensors shaped for cfg; matrices and biases zero, LN gains one.
  static ModelWeights Zeros(const ModelConfig& cfg);

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

template <typename T>
struct TensorView {
  std::string name;
  std::span<T> data;
  std::vector<size_t> shape;  // {rows, cols} for matrices, {n} for vectors
};

// Every stored tensor in canonical order: tok_emb, pos_emb, type_emb,
// layers.{i}.{q_w,q_b,k_w,k_b,v_w,v_b,o_w,o_b,ln1_g,ln1_b,ff1_w,ff1_b,ff2_w,
// ff2_b,ln2_g,ln2_b}, final_ln_gain, final_ln_bias, lm_head. Optional
// tensors are skipped when the config does not use them.
template <typename T>
std::vector<TensorView<T>> tensor_views(const ModelConfig& cfg, ModelWeights<T>& w);
template <typename T>
std::vector<TensorView<const T>> tensor_views(const ModelConfig& cfg, const ModelWeights<T>& w);

// Throws ShapeError naming the first tensor that disagrees with cfg.
template <typename T>
void check_shapes(const ModelConfig& cfg, const ModelWeights<T>& w);

// Weight matrices ~ N(0, std) drawn in canonical tensor order; biases zero,
// LN gains one.
template <typename T>
ModelWeights<T> init_random(const ModelConfig& cfg, Rng& rng, double std);

template <typename To, typename From>
ModelWeights<To> cast_weights(const ModelWeights<From>& w);

// max_seq_len x max_seq_len additive mask: kMaskValue where j > i for the
// decoder, all zero for the encoder. Always derived from the config.
template <typename T>
BasicMatrix<T> attention_mask(const ModelConfig& cfg);

template <typename T>
struct LnCache {
  BasicMatrix<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
struct LayerCache {
  BasicMatrix<T> x_in;         // residual stream entering the block
  BasicMatrix<T> attn_in;      // LN1(x_in) for pre-LN, else x_in
  LnCache<T> ln1;
  BasicMatrix<T> q, k, v;      // seq x inner
  std::vector<BasicMatrix<T>> probs;  // per head, seq x seq
  BasicMatrix<T> ctx;          // seq x inner, head h in columns [h*d_head, (h+1)*d_head)
  BasicMatrix<T> x_mid;        // residual stream after the attention sub-layer
  BasicMatrix<T> ffn_in;
  LnCache<T> ln2;
  BasicMatrix<T> h1;           // pre-activation
  BasicMatrix<T> act;          // gelu(h1)
  BasicMatrix<T> x_out;
};

template <typename T>
struct ForwardCache {
  BasicMatrix<T> x0;  // embeddings
  std::vector<LayerCache<T>> layers;
  LnCache<T> final_ln;
  BasicMatrix<T> h_final;
  BasicMatrix<T> logits;
};

// Throws InputError for out-of-range ids or sequences longer than
// max_seq_len. token_types may be empty (all segment 0).
void check_tokens(const ModelConfig& cfg, std::span<const int> tokens,
                  std::span<const int> token_types = {});

// seq_len x vocab_size logits.
template <typename T>
BasicMatrix<T> forward(const ModelConfig& cfg, const ModelWeights<T>& w,
                       std::span<const int> tokens, std::span<const int> token_types = {});

// Same as forward but keeps every intermediate activation.
template <typename T>
ForwardCache<T> forward_cached(const ModelConfig& cfg, const ModelWeights<T>& w,
                               std::span<const int> tokens,
                               std::span<const int> token_types = {});

// Natural-log cross entropy of one logit row against a target id.
template <typename T>
double cross_entropy(std::span<const T> logits, size_t target);

// Mean next-token cross entropy; positions 0..n-2 predict 1..n-1.
template <typename T>
double lm_loss(const ModelConfig& cfg, const ModelWeights<T>& w, std::span<const int> tokens);

// Mean cross entropy over masked positions. tokens must already hold
// cfg.mask_id() at every masked position.
template <typename T>
double mlm_loss(const ModelConfig& cfg, const ModelWeights<T>& w, std::span<const int> tokens,
                std::span<const size_t> masked_positions, std::span<const int> original_ids);

}  // namespace ttfr
