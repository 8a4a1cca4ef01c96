// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "model_internal.hpp"
#include "ttfr/errors.hpp"
#include "ttfr/kernels.hpp"
#include "ttfr/trainer.hpp"

namespace ttfr {

namespace {

template <typename T>
void accumulate(BasicMatrix<T>& dst, const BasicMatrix<T>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst.values()[i] += src.values()[i];
}

template <typename T>
void accumulate_colsum(std::vector<T>& dst, const BasicMatrix<T>& src) {
  for (size_t i = 0; i < src.rows(); ++i) {
    auto r = src.row(i);
    for (size_t j = 0; j < r.size(); ++j) dst[j] += r[j];
  }
}

// y = gain * xhat + bias, xhat = (x - mean) * rstd.
template <typename T>
BasicMatrix<T> layer_norm_backward(const BasicMatrix<T>& dy, const LnCache<T>& cache,
                                   std::span<const T> gain, std::vector<T>& dgain,
                                   std::vector<T>& dbias) {
  const size_t n = dy.cols();
  BasicMatrix<T> dx(dy.rows(), n);
  std::vector<T> dxhat(n);
  for (size_t i = 0; i < dy.rows(); ++i) {
    auto g = dy.row(i);
    auto xh = cache.xhat.row(i);
    T mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (size_t j = 0; j < n; ++j) {
      dgain[j] += g[j] * xh[j];
      dbias[j] += g[j];
      dxhat[j] = g[j] * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xh[j];
    }
    mean_dxhat /= static_cast<T>(n);
    mean_dxhat_xhat /= static_cast<T>(n);
    auto out = dx.row(i);
    const T rstd = cache.rstd[i];
    for (size_t j = 0; j < n; ++j) {
      out[j] = rstd * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
    }
  }
  return dx;
}

template <typename T>
BasicMatrix<T> slice_cols(const BasicMatrix<T>& m, size_t begin, size_t count) {
  BasicMatrix<T> out(m.rows(), count);
  for (size_t i = 0; i < m.rows(); ++i) {
    std::copy_n(m.row(i).begin() + begin, count, out.row(i).begin());
  }
  return out;
}

template <typename T>
void write_cols(BasicMatrix<T>& dst, const BasicMatrix<T>& src, size_t begin) {
  for (size_t i = 0; i < src.rows(); ++i) {
    std::copy(src.row(i).begin(), src.row(i).end(), dst.row(i).begin() + begin);
  }
}

// Gradient of one block; accumulates parameter gradients into g and returns
// the gradient with respect to the block input.
template <typename T>
BasicMatrix<T> layer_backward(const ModelConfig& cfg, const LayerWeights<T>& lw,
                              const LayerCache<T>& lc, BasicMatrix<T> dx_out,
                              LayerWeights<T>& g) {
  const bool pre = cfg.ln_mode == LnMode::kPre;
  const bool ln = cfg.ln_enabled;
  const size_t dh = cfg.d_head;
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));

  // Feed-forward sub-layer.
  BasicMatrix<T> dsum2 =
      (!pre && ln) ? layer_norm_backward<T>(dx_out, lc.ln2, lw.ln2_g, g.ln2_g, g.ln2_b)
                   : std::move(dx_out);
  BasicMatrix<T> dx_mid = dsum2;
  accumulate(g.ff2_w, matmul_tn(dsum2, lc.act));
  accumulate_colsum(g.ff2_b, dsum2);
  BasicMatrix<T> dh1 = matmul(dsum2, lw.ff2_w);
  for (size_t i = 0; i < dh1.size(); ++i) dh1.values()[i] *= gelu_derivative(lc.h1.values()[i]);
  accumulate(g.ff1_w, matmul_tn(dh1, lc.ffn_in));
  accumulate_colsum(g.ff1_b, dh1);
  BasicMatrix<T> dffn_in = matmul(dh1, lw.ff1_w);
  if (pre && ln) {
    accumulate(dx_mid, layer_norm_backward<T>(dffn_in, lc.ln2, lw.ln2_g, g.ln2_g, g.ln2_b));
  } else {
    accumulate(dx_mid, dffn_in);
  }

  // Attention sub-layer.
  BasicMatrix<T> dsum =
      (!pre && ln) ? layer_norm_backward<T>(dx_mid, lc.ln1, lw.ln1_g, g.ln1_g, g.ln1_b)
                   : std::move(dx_mid);
  BasicMatrix<T> dx_in = dsum;
  accumulate(g.o_w, matmul_tn(dsum, lc.ctx));
  accumulate_colsum(g.o_b, dsum);
  const BasicMatrix<T> dctx = matmul(dsum, lw.o_w);

  const size_t n = lc.q.rows();
  BasicMatrix<T> dq(n, cfg.inner_dim()), dk(n, cfg.inner_dim()), dv(n, cfg.inner_dim());
  for (size_t h = 0; h < cfg.n_heads; ++h) {
    const auto& p = lc.probs[h];
    const auto qh = slice_cols(lc.q, h * dh, dh);
    const auto kh = slice_cols(lc.k, h * dh, dh);
    const auto vh = slice_cols(lc.v, h * dh, dh);
    const auto dctx_h = slice_cols(dctx, h * dh, dh);
    BasicMatrix<T> dp = matmul_nt(dctx_h, vh);
    write_cols(dv, matmul_tn(p, dctx_h), h * dh);
    for (size_t i = 0; i < n; ++i) {
      T dot = 0;
      for (size_t j = 0; j < n; ++j) dot += dp(i, j) * p(i, j);
      for (size_t j = 0; j < n; ++j) dp(i, j) = p(i, j) * (dp(i, j) - dot) * scale;
    }
    write_cols(dq, matmul(dp, kh), h * dh);
    write_cols(dk, matmul_tn(dp, qh), h * dh);
  }
  accumulate(g.q_w, matmul_tn(dq, lc.attn_in));
  accumulate(g.k_w, matmul_tn(dk, lc.attn_in));
  accumulate(g.v_w, matmul_tn(dv, lc.attn_in));
  accumulate_colsum(g.q_b, dq);
  accumulate_colsum(g.k_b, dk);
  accumulate_colsum(g.v_b, dv);
  BasicMatrix<T> dattn_in = matmul(dq, lw.q_w);
  accumulate(dattn_in, matmul(dk, lw.k_w));
  accumulate(dattn_in, matmul(dv, lw.v_w));
  if (pre && ln) {
    accumulate(dx_in, layer_norm_backward<T>(dattn_in, lc.ln1, lw.ln1_g, g.ln1_g, g.ln1_b));
  } else {
    accumulate(dx_in, dattn_in);
  }
  return dx_in;
}

template <typename T>
ModelWeights<T> backward_from_logits(const ModelConfig& cfg, const ModelWeights<T>& w,
                                     const ForwardCache<T>& cache, const BasicMatrix<T>& dlogits,
                                     std::span<const int> tokens,
                                     std::span<const int> token_types) {
  ModelWeights<T> g = zeros_like<T>(cfg);

  BasicMatrix<T>& dhead = cfg.tie_lm_head ? g.tok_emb : g.lm_head;
  accumulate(dhead, matmul_tn(dlogits, cache.h_final));
  BasicMatrix<T> dx = matmul(dlogits, w.head(cfg));
  if (cfg.ln_enabled) {
    dx = layer_norm_backward<T>(dx, cache.final_ln, w.final_ln_gain, g.final_ln_gain,
                                g.final_ln_bias);
  }
  for (size_t li = w.layers.size(); li-- > 0;) {
    dx = layer_backward<T>(cfg, w.layers[li], cache.layers[li], std::move(dx), g.layers[li]);
  }
  for (size_t i = 0; i < tokens.size(); ++i) {
    auto src = dx.row(i);
    auto te = g.tok_emb.row(static_cast<size_t>(tokens[i]));
    auto pe = g.pos_emb.row(i);
    for (size_t j = 0; j < src.size(); ++j) {
      te[j] += src[j];
      pe[j] += src[j];
    }
    if (cfg.has_type_emb()) {
      const size_t type = token_types.empty() ? 0 : static_cast<size_t>(token_types[i]);
      auto ty = g.type_emb.row(type);
      for (size_t j = 0; j < src.size(); ++j) ty[j] += src[j];
    }
  }
  return g;
}

// Adds (softmax(row) - onehot(target)) * weight into drow; returns the CE.
template <typename T>
double softmax_xent_grad(std::span<const T> logits, size_t target, T weight, std::span<T> drow) {
  T max = logits[0];
  for (T v : logits) max = std::max(max, v);
  T sum = 0;
  for (size_t j = 0; j < logits.size(); ++j) {
    drow[j] = std::exp(logits[j] - max);
    sum += drow[j];
  }
  for (size_t j = 0; j < logits.size(); ++j) drow[j] = drow[j] / sum * weight;
  drow[target] -= weight;
  return cross_entropy<T>(logits, target);
}

}  // namespace

template <typename T>
ModelWeights<T> zeros_like(const ModelConfig& cfg) {
  ModelWeights<T> g = ModelWeights<T>::Zeros(cfg);
  for (auto& v : tensor_views(cfg, g)) std::fill(v.data.begin(), v.data.end(), T{0});
  return g;
}

template <typename T>
double global_norm(const ModelConfig& cfg, const ModelWeights<T>& grads) {
  double sum = 0.0;
  for (const auto& v : tensor_views(cfg, grads)) {
    for (T x : v.data) sum += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(sum);
}

template <typename T>
GradResult<T> backward(const ModelConfig& cfg, const ModelWeights<T>& w,
                       std::span<const int> tokens) {
  if (cfg.is_encoder()) {
    throw UnsupportedError("backward: next-token gradients require a decoder-causal model");
  }
  if (tokens.size() < 2) throw InputError("backward needs at least 2 tokens");
  const ForwardCache<T> cache = forward_cached(cfg, w, tokens);
  const size_t n = tokens.size();
  BasicMatrix<T> dlogits(n, cfg.vocab_size);
  const T weight = T{1} / static_cast<T>(n - 1);
  double loss = 0.0;
  for (size_t i = 0; i + 1 < n; ++i) {
    loss += softmax_xent_grad<T>(cache.logits.row(i), static_cast<size_t>(tokens[i + 1]), weight,
                                 dlogits.row(i));
  }
  GradResult<T> out;
  out.loss = loss / static_cast<double>(n - 1);
  out.grads = backward_from_logits(cfg, w, cache, dlogits, tokens, {});
  return out;
}

template <typename T>
GradResult<T> mlm_backward(const ModelConfig& cfg, const ModelWeights<T>& w,
                           std::span<const int> tokens, std::span<const size_t> masked_positions,
                           std::span<const int> original_ids) {
  if (!cfg.is_encoder()) throw UnsupportedError("mlm_backward requires an encoder model");
  internal::check_mlm_targets(cfg, tokens, masked_positions, original_ids);
  const ForwardCache<T> cache = forward_cached(cfg, w, tokens);
  BasicMatrix<T> dlogits(tokens.size(), cfg.vocab_size);
  const T weight = T{1} / static_cast<T>(masked_positions.size());
  std::vector<T> row(cfg.vocab_size);
  double loss = 0.0;
  for (size_t i = 0; i < masked_positions.size(); ++i) {
    const size_t p = masked_positions[i];
    loss += softmax_xent_grad<T>(cache.logits.row(p), static_cast<size_t>(original_ids[i]), weight,
                                 row);
    auto d = dlogits.row(p);
    for (size_t j = 0; j < row.size(); ++j) d[j] += row[j];
  }
  GradResult<T> out;
  out.loss = loss / static_cast<double>(masked_positions.size());
  out.grads = backward_from_logits(cfg, w, cache, dlogits, tokens, {});
  return out;
}

#define TTFR_INSTANTIATE_BACKWARD(T)                                                           \
  template ModelWeights<T> zeros_like(const ModelConfig&);                                     \
  template double global_norm(const ModelConfig&, const ModelWeights<T>&);                     \
  template GradResult<T> backward(const ModelConfig&, const ModelWeights<T>&,                  \
                                  std::span<const int>);                                       \
  template GradResult<T> mlm_backward(const ModelConfig&, const ModelWeights<T>&,              \
                                      std::span<const int>, std::span<const size_t>,           \
                                      std::span<const int>);

TTFR_INSTANTIATE_BACKWARD(float)
TTFR_INSTANTIATE_BACKWARD(double)
#undef TTFR_INSTANTIATE_BACKWARD

}  // namespace ttfr
