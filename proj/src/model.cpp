// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttfr/model.hpp"

#include <algorithm>
#include <cmath>

#include "model_internal.hpp"
#include "ttfr/errors.hpp"
#include "ttfr/kernels.hpp"

namespace ttfr {

namespace {

template <typename T, typename W>
void push_matrix(std::vector<TensorView<T>>& out, std::string name, W& m) {
  out.push_back({std::move(name), std::span<T>(m.data(), m.size()), {m.rows(), m.cols()}});
}

template <typename T, typename V>
void push_vector(std::vector<TensorView<T>>& out, std::string name, V& v) {
  out.push_back({std::move(name), std::span<T>(v.data(), v.size()), {v.size()}});
}

// Shared by the const and mutable overloads.
template <typename T, typename Weights>
std::vector<TensorView<T>> collect_views(const ModelConfig& cfg, Weights& w) {
  std::vector<TensorView<T>> out;
  out.reserve(tensor_count(cfg));
  push_matrix<T>(out, "tok_emb", w.tok_emb);
  push_matrix<T>(out, "pos_emb", w.pos_emb);
  if (cfg.has_type_emb()) push_matrix<T>(out, "type_emb", w.type_emb);
  for (size_t i = 0; i < w.layers.size(); ++i) {
    auto& l = w.layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    push_matrix<T>(out, p + "q_w", l.q_w);
    push_vector<T>(out, p + "q_b", l.q_b);
    push_matrix<T>(out, p + "k_w", l.k_w);
    push_vector<T>(out, p + "k_b", l.k_b);
    push_matrix<T>(out, p + "v_w", l.v_w);
    push_vector<T>(out, p + "v_b", l.v_b);
    push_matrix<T>(out, p + "o_w", l.o_w);
    push_vector<T>(out, p + "o_b", l.o_b);
    push_vector<T>(out, p + "ln1_g", l.ln1_g);
    push_vector<T>(out, p + "ln1_b", l.ln1_b);
    push_matrix<T>(out, p + "ff1_w", l.ff1_w);
    push_vector<T>(out, p + "ff1_b", l.ff1_b);
    push_matrix<T>(out, p + "ff2_w", l.ff2_w);
    push_vector<T>(out, p + "ff2_b", l.ff2_b);
    push_vector<T>(out, p + "ln2_g", l.ln2_g);
    push_vector<T>(out, p + "ln2_b", l.ln2_b);
  }
  push_vector<T>(out, "final_ln_gain", w.final_ln_gain);
  push_vector<T>(out, "final_ln_bias", w.final_ln_bias);
  if (!cfg.tie_lm_head) push_matrix<T>(out, "lm_head", w.lm_head);
  return out;
}

template <typename T>
void add_bias_rows(BasicMatrix<T>& m, std::span<const T> bias) {
  for (size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

template <typename T>
void add_into(BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  for (size_t i = 0; i < a.size(); ++i) a.values()[i] += b.values()[i];
}

template <typename T>
BasicMatrix<T> slice_cols(const BasicMatrix<T>& m, size_t begin, size_t count) {
  BasicMatrix<T> out(m.rows(), count);
  for (size_t i = 0; i < m.rows(); ++i) {
    std::copy_n(m.row(i).begin() + begin, count, out.row(i).begin());
  }
  return out;
}

}  // namespace

namespace internal {

template <typename T>
BasicMatrix<T> linear(const BasicMatrix<T>& x, const BasicMatrix<T>& w, std::span<const T> b) {
  BasicMatrix<T> y = matmul_nt(x, w);
  add_bias_rows<T>(y, b);
  return y;
}

template <typename T>
BasicMatrix<T> layer_norm_cached(const BasicMatrix<T>& x, std::span<const T> gain,
                                 std::span<const T> bias, LnCache<T>& cache) {
  const size_t n = x.cols();
  const T eps = static_cast<T>(kLayerNormEps);
  BasicMatrix<T> y(x.rows(), n);
  cache.xhat = BasicMatrix<T>(x.rows(), n);
  cache.rstd.assign(x.rows(), T{0});
  for (size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    T mean = 0;
    for (T v : xr) mean += v;
    mean /= static_cast<T>(n);
    T var = 0;
    for (T v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    const T rstd = T{1} / std::sqrt(var + eps);
    cache.rstd[i] = rstd;
    auto xh = cache.xhat.row(i);
    auto yr = y.row(i);
    for (size_t j = 0; j < n; ++j) {
      xh[j] = (xr[j] - mean) * rstd;
      yr[j] = gain[j] * xh[j] + bias[j];
    }
  }
  return y;
}

}  // namespace internal

template <typename T>
LayerWeights<T> LayerWeights<T>::Zeros(const ModelConfig& cfg) {
  const size_t d = cfg.d_model, inner = cfg.inner_dim(), ff = cfg.d_ff;
  LayerWeights<T> l;
  l.q_w = BasicMatrix<T>(inner, d);
  l.k_w = BasicMatrix<T>(inner, d);
  l.v_w = BasicMatrix<T>(inner, d);
  l.q_b.assign(inner, T{0});
  l.k_b.assign(inner, T{0});
  l.v_b.assign(inner, T{0});
  l.o_w = BasicMatrix<T>(d, inner);
  l.o_b.assign(d, T{0});
  l.ln1_g.assign(d, T{1});
  l.ln1_b.assign(d, T{0});
  l.ff1_w = BasicMatrix<T>(ff, d);
  l.ff1_b.assign(ff, T{0});
  l.ff2_w = BasicMatrix<T>(d, ff);
  l.ff2_b.assign(d, T{0});
  l.ln2_g.assign(d, T{1});
  l.ln2_b.assign(d, T{0});
  return l;
}

template <typename T>
ModelWeights<T> ModelWeights<T>::Zeros(const ModelConfig& cfg) {
  ModelWeights<T> w;
  w.tok_emb = BasicMatrix<T>(cfg.vocab_size, cfg.d_model);
  w.pos_emb = BasicMatrix<T>(cfg.max_seq_len, cfg.d_model);
  if (cfg.has_type_emb()) w.type_emb = BasicMatrix<T>(2, cfg.d_model);
  w.layers.reserve(cfg.n_layers);
  for (size_t i = 0; i < cfg.n_layers; ++i) w.layers.push_back(LayerWeights<T>::Zeros(cfg));
  w.final_ln_gain.assign(cfg.d_model, T{1});
  w.final_ln_bias.assign(cfg.d_model, T{0});
  if (!cfg.tie_lm_head) w.lm_head = BasicMatrix<T>(cfg.vocab_size, cfg.d_model);
  return w;
}

template <typename T>
std::vector<TensorView<T>> tensor_views(const ModelConfig& cfg, ModelWeights<T>& w) {
  return collect_views<T>(cfg, w);
}

template <typename T>
std::vector<TensorView<const T>> tensor_views(const ModelConfig& cfg, const ModelWeights<T>& w) {
  return collect_views<const T>(cfg, w);
}

template <typename T>
void check_shapes(const ModelConfig& cfg, const ModelWeights<T>& w) {
  if (w.layers.size() != cfg.n_layers) {
    throw ShapeError("weights have " + std::to_string(w.layers.size()) +
                     " layers, config expects " + std::to_string(cfg.n_layers));
  }
  if (!cfg.has_type_emb() && !w.type_emb.empty()) {
    throw ShapeError("type_emb present but config does not use token types");
  }
  if (cfg.tie_lm_head && !w.lm_head.empty()) {
    throw ShapeError("lm_head stored although config ties it to tok_emb");
  }
  const ModelWeights<T> ref = ModelWeights<T>::Zeros(cfg);
  const auto expected = tensor_views(cfg, ref);
  const auto actual = tensor_views(cfg, w);
  for (size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].shape != actual[i].shape || actual[i].data.size() != expected[i].data.size()) {
      throw ShapeError("tensor '" + expected[i].name + "' has the wrong shape for the config");
    }
  }
}

template <typename T>
ModelWeights<T> init_random(const ModelConfig& cfg, Rng& rng, double std) {
  cfg.validate();
  ModelWeights<T> w = ModelWeights<T>::Zeros(cfg);
  for (auto& view : tensor_views(cfg, w)) {
    if (view.shape.size() != 2) continue;
    const auto sample = sample_normal<T>(rng, 0.0, std, view.shape[0], view.shape[1]);
    std::copy(sample.values().begin(), sample.values().end(), view.data.begin());
  }
  return w;
}

template <typename To, typename From>
ModelWeights<To> cast_weights(const ModelWeights<From>& w) {
  auto cast_vec = [](const std::vector<From>& v) { return std::vector<To>(v.begin(), v.end()); };
  ModelWeights<To> out;
  out.tok_emb = cast_matrix<To>(w.tok_emb);
  out.pos_emb = cast_matrix<To>(w.pos_emb);
  out.type_emb = cast_matrix<To>(w.type_emb);
  out.lm_head = cast_matrix<To>(w.lm_head);
  out.final_ln_gain = cast_vec(w.final_ln_gain);
  out.final_ln_bias = cast_vec(w.final_ln_bias);
  for (const auto& l : w.layers) {
    LayerWeights<To> o;
    o.q_w = cast_matrix<To>(l.q_w);
    o.k_w = cast_matrix<To>(l.k_w);
    o.v_w = cast_matrix<To>(l.v_w);
    o.o_w = cast_matrix<To>(l.o_w);
    o.ff1_w = cast_matrix<To>(l.ff1_w);
    o.ff2_w = cast_matrix<To>(l.ff2_w);
    o.q_b = cast_vec(l.q_b);
    o.k_b = cast_vec(l.k_b);
    o.v_b = cast_vec(l.v_b);
    o.o_b = cast_vec(l.o_b);
    o.ff1_b = cast_vec(l.ff1_b);
    o.ff2_b = cast_vec(l.ff2_b);
    o.ln1_g = cast_vec(l.ln1_g);
    o.ln1_b = cast_vec(l.ln1_b);
    o.ln2_g = cast_vec(l.ln2_g);
    o.ln2_b = cast_vec(l.ln2_b);
    out.layers.push_back(std::move(o));
  }
  return out;
}

template <typename T>
BasicMatrix<T> attention_mask(const ModelConfig& cfg) {
  BasicMatrix<T> mask(cfg.max_seq_len, cfg.max_seq_len);
  if (cfg.arch == Arch::kDecoderCausal) {
    for (size_t i = 0; i < cfg.max_seq_len; ++i) {
      for (size_t j = i + 1; j < cfg.max_seq_len; ++j) mask(i, j) = static_cast<T>(kMaskValue);
    }
  }
  return mask;
}

void check_tokens(const ModelConfig& cfg, std::span<const int> tokens,
                  std::span<const int> token_types) {
  if (tokens.size() > cfg.max_seq_len) {
    throw InputError("sequence of length " + std::to_string(tokens.size()) +
                     " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || static_cast<size_t>(tokens[i]) >= cfg.vocab_size) {
      throw InputError("token id " + std::to_string(tokens[i]) + " at position " +
                       std::to_string(i) + " is outside the vocabulary of " +
                       std::to_string(cfg.vocab_size));
    }
  }
  if (!token_types.empty()) {
    if (!cfg.has_type_emb()) throw InputError("token types given but the model has no type_emb");
    if (token_types.size() != tokens.size()) {
      throw InputError("token_types length differs from tokens length");
    }
    for (int t : token_types) {
      if (t != 0 && t != 1) throw InputError("token type must be 0 or 1");
    }
  }
}

template <typename T>
ForwardCache<T> forward_cached(const ModelConfig& cfg, const ModelWeights<T>& w,
                               std::span<const int> tokens, std::span<const int> token_types) {
  check_tokens(cfg, tokens, token_types);
  const size_t n = tokens.size();
  const size_t d = cfg.d_model;
  const size_t dh = cfg.d_head;
  ForwardCache<T> cache;

  cache.x0 = BasicMatrix<T>(n, d);
  for (size_t i = 0; i < n; ++i) {
    auto x = cache.x0.row(i);
    auto te = w.tok_emb.row(static_cast<size_t>(tokens[i]));
    auto pe = w.pos_emb.row(i);
    for (size_t j = 0; j < d; ++j) x[j] = te[j] + pe[j];
    if (cfg.has_type_emb()) {
      const size_t type = token_types.empty() ? 0 : static_cast<size_t>(token_types[i]);
      auto ty = w.type_emb.row(type);
      for (size_t j = 0; j < d; ++j) x[j] += ty[j];
    }
  }

  const BasicMatrix<T> mask = attention_mask<T>(cfg);
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));
  const bool pre = cfg.ln_mode == LnMode::kPre;
  const bool ln = cfg.ln_enabled;

  BasicMatrix<T> x = cache.x0;
  cache.layers.resize(w.layers.size());
  for (size_t li = 0; li < w.layers.size(); ++li) {
    const auto& lw = w.layers[li];
    auto& lc = cache.layers[li];
    lc.x_in = x;

    lc.attn_in = (pre && ln) ? internal::layer_norm_cached<T>(x, lw.ln1_g, lw.ln1_b, lc.ln1) : x;
    lc.q = internal::linear<T>(lc.attn_in, lw.q_w, lw.q_b);
    lc.k = internal::linear<T>(lc.attn_in, lw.k_w, lw.k_b);
    lc.v = internal::linear<T>(lc.attn_in, lw.v_w, lw.v_b);
    lc.ctx = BasicMatrix<T>(n, cfg.inner_dim());
    lc.probs.resize(cfg.n_heads);
    for (size_t h = 0; h < cfg.n_heads; ++h) {
      const auto qh = slice_cols(lc.q, h * dh, dh);
      const auto kh = slice_cols(lc.k, h * dh, dh);
      const auto vh = slice_cols(lc.v, h * dh, dh);
      BasicMatrix<T> scores = matmul_nt(qh, kh);
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) scores(i, j) = scores(i, j) * scale + mask(i, j);
      }
      lc.probs[h] = softmax_rows(scores);
      const auto ctx_h = matmul(lc.probs[h], vh);
      for (size_t i = 0; i < n; ++i) {
        std::copy(ctx_h.row(i).begin(), ctx_h.row(i).end(), lc.ctx.row(i).begin() + h * dh);
      }
    }
    BasicMatrix<T> sum = internal::linear<T>(lc.ctx, lw.o_w, lw.o_b);
    add_into(sum, x);
    lc.x_mid = (!pre && ln) ? internal::layer_norm_cached<T>(sum, lw.ln1_g, lw.ln1_b, lc.ln1) : sum;

    lc.ffn_in = (pre && ln) ? internal::layer_norm_cached<T>(lc.x_mid, lw.ln2_g, lw.ln2_b, lc.ln2)
                            : lc.x_mid;
    lc.h1 = internal::linear<T>(lc.ffn_in, lw.ff1_w, lw.ff1_b);
    lc.act = gelu(lc.h1);
    BasicMatrix<T> sum2 = internal::linear<T>(lc.act, lw.ff2_w, lw.ff2_b);
    add_into(sum2, lc.x_mid);
    lc.x_out = (!pre && ln) ? internal::layer_norm_cached<T>(sum2, lw.ln2_g, lw.ln2_b, lc.ln2) : sum2;
    x = lc.x_out;
  }

  cache.h_final = ln ? internal::layer_norm_cached<T>(x, w.final_ln_gain, w.final_ln_bias,
                                                      cache.final_ln)
                     : x;
  cache.logits = matmul_nt(cache.h_final, w.head(cfg));
  return cache;
}

template <typename T>
BasicMatrix<T> forward(const ModelConfig& cfg, const ModelWeights<T>& w,
                       std::span<const int> tokens, std::span<const int> token_types) {
  return forward_cached(cfg, w, tokens, token_types).logits;
}

template <typename T>
double cross_entropy(std::span<const T> logits, size_t target) {
  double max = logits[0];
  for (T v : logits) max = std::max(max, static_cast<double>(v));
  double sum = 0.0;
  for (T v : logits) sum += std::exp(static_cast<double>(v) - max);
  return max + std::log(sum) - static_cast<double>(logits[target]);
}

template <typename T>
double lm_loss(const ModelConfig& cfg, const ModelWeights<T>& w, std::span<const int> tokens) {
  if (tokens.size() < 2) throw InputError("lm_loss needs at least 2 tokens");
  const auto logits = forward(cfg, w, tokens);
  double total = 0.0;
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    total += cross_entropy<T>(logits.row(i), static_cast<size_t>(tokens[i + 1]));
  }
  return total / static_cast<double>(tokens.size() - 1);
}

template <typename T>
double mlm_loss(const ModelConfig& cfg, const ModelWeights<T>& w, std::span<const int> tokens,
                std::span<const size_t> masked_positions, std::span<const int> original_ids) {
  if (!cfg.is_encoder()) throw InputError("mlm_loss requires an encoder-bidirectional model");
  internal::check_mlm_targets(cfg, tokens, masked_positions, original_ids);
  const auto logits = forward(cfg, w, tokens);
  double total = 0.0;
  for (size_t i = 0; i < masked_positions.size(); ++i) {
    total += cross_entropy<T>(logits.row(masked_positions[i]), static_cast<size_t>(original_ids[i]));
  }
  return total / static_cast<double>(masked_positions.size());
}

namespace internal {

void check_mlm_targets(const ModelConfig& cfg, std::span<const int> tokens,
                       std::span<const size_t> masked_positions, std::span<const int> original_ids) {
  if (masked_positions.empty()) throw InputError("mlm: no masked positions");
  if (masked_positions.size() != original_ids.size()) {
    throw InputError("mlm: masked_positions and original_ids differ in length");
  }
  for (size_t i = 0; i < masked_positions.size(); ++i) {
    const size_t p = masked_positions[i];
    if (p >= tokens.size()) {
      throw InputError("mlm: masked position " + std::to_string(p) + " out of range");
    }
    if (static_cast<size_t>(tokens[p]) != cfg.mask_id()) {
      throw InputError("mlm: position " + std::to_string(p) + " does not hold the mask id");
    }
    if (original_ids[i] < 0 || static_cast<size_t>(original_ids[i]) >= cfg.vocab_size) {
      throw InputError("mlm: original id out of range");
    }
  }
}

template BasicMatrix<float> linear(const BasicMatrix<float>&, const BasicMatrix<float>&,
                                   std::span<const float>);
template BasicMatrix<double> linear(const BasicMatrix<double>&, const BasicMatrix<double>&,
                                    std::span<const double>);
template BasicMatrix<float> layer_norm_cached(const BasicMatrix<float>&, std::span<const float>,
                                              std::span<const float>, LnCache<float>&);
template BasicMatrix<double> layer_norm_cached(const BasicMatrix<double>&, std::span<const double>,
                                               std::span<const double>, LnCache<double>&);

}  // namespace internal

#define TTFR_INSTANTIATE_MODEL(T)                                                             \
  template struct LayerWeights<T>;                                                            \
  template struct ModelWeights<T>;                                                            \
  template std::vector<TensorView<T>> tensor_views(const ModelConfig&, ModelWeights<T>&);     \
  template std::vector<TensorView<const T>> tensor_views(const ModelConfig&,                  \
                                                         const ModelWeights<T>&);             \
  template void check_shapes(const ModelConfig&, const ModelWeights<T>&);                     \
  template ModelWeights<T> init_random(const ModelConfig&, Rng&, double);                     \
  template BasicMatrix<T> attention_mask(const ModelConfig&);                                 \
  template ForwardCache<T> forward_cached(const ModelConfig&, const ModelWeights<T>&,         \
                                          std::span<const int>, std::span<const int>);        \
  template BasicMatrix<T> forward(const ModelConfig&, const ModelWeights<T>&,                 \
                                  std::span<const int>, std::span<const int>);                \
  template double cross_entropy(std::span<const T>, size_t);                                  \
  template double lm_loss(const ModelConfig&, const ModelWeights<T>&, std::span<const int>);  \
  template double mlm_loss(const ModelConfig&, const ModelWeights<T>&, std::span<const int>,  \
                           std::span<const size_t>, std::span<const int>);

TTFR_INSTANTIATE_MODEL(float)
TTFR_INSTANTIATE_MODEL(double)
#undef TTFR_INSTANTIATE_MODEL

template ModelWeights<double> cast_weights<double, float>(const ModelWeights<float>&);
template ModelWeights<float> cast_weights<float, double>(const ModelWeights<double>&);
template ModelWeights<float> cast_weights<float, float>(const ModelWeights<float>&);

}  // namespace ttfr
