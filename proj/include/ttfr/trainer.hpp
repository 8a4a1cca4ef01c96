// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-written backpropagation, Adam and the toy training loop.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttfr/config.hpp"
#include "ttfr/model.hpp"

namespace ttfr {

struct TrainConfig {
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  size_t batch_size = 8;
  size_t seq_len = 32;
  size_t steps = 100;
  uint64_t seed = 0;
  size_t log_every = 1;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping

  // Throws ParameterError; seq_len is checked against the model.
  void validate(const ModelConfig& model) const;
};

template <typename T>
struct GradResult {
  double loss = 0.0;
  ModelWeights<T> grads;  // same shapes as the weights; tied head folded into tok_emb
};

// Exact gradients of lm_loss. Decoder only.
template <typename T>
GradResult<T> backward(const ModelConfig& cfg, const ModelWeights<T>& w,
                       std::span<const int> tokens);

// Exact gradients of mlm_loss for encoder models; used by tests that need a
// trained toy encoder.
template <typename T>
GradResult<T> mlm_backward(const ModelConfig& cfg, const ModelWeights<T>& w,
                           std::span<const int> tokens, std::span<const size_t> masked_positions,
                           std::span<const int> original_ids);

// Zero-valued tensors (LN gains included) with the shapes of cfg.
template <typename T>
ModelWeights<T> zeros_like(const ModelConfig& cfg);

template <typename T>
double global_norm(const ModelConfig& cfg, const ModelWeights<T>& grads);

template <typename T>
struct OptimizerState {
  ModelWeights<T> m;
  ModelWeights<T> v;
  size_t step = 0;

  static OptimizerState Init(const ModelConfig& cfg) {
    return {zeros_like<T>(cfg), zeros_like<T>(cfg), 0};
  }
};

// Global-norm clipping followed by a bias-corrected Adam update. grads is
// taken by value because clipping rescales it. Returns the pre-clip norm.
template <typename T>
double adam_step(const ModelConfig& cfg, ModelWeights<T>& w, ModelWeights<T> grads,
                 OptimizerState<T>& state, const TrainConfig& tcfg);

// Bytes map to ids 0..255; encoder extras append [MASK] as id 256. [PAD]
// shares id 0 with the NUL byte.
class CharTokenizer {
 public:
  explicit CharTokenizer(bool encoder_extras = false) : extras_(encoder_extras) {}

  size_t vocab_size() const { return extras_ ? 257 : 256; }
  int mask_id() const;
  static constexpr int kPadId = 0;

  std::vector<int> encode(std::string_view bytes) const;
  std::string decode(std::span<const int> ids) const;

 private:
  bool extras_;
};

struct LossPoint {
  size_t step;
  double loss;
};

template <typename T>
struct TrainResult {
  ModelWeights<T> weights;
  std::vector<LossPoint> log;
};

// Samples batch_size windows of seq_len tokens with replacement (seeded)
// per step; each window contributes seq_len - 1 next-token predictions. The logged loss at step s is the batch loss before update s.
template <typename T>
TrainResult<T> train(const ModelConfig& cfg, ModelWeights<T> w, std::span<const int> corpus,
                     const TrainConfig& tcfg);

// "step,loss" header, one row per log point.
void write_loss_csv(const std::string& path, std::span<const LossPoint> log);
std::string loss_csv(std::span<const LossPoint> log);

}  // namespace ttfr
