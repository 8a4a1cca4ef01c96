// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

// Weight transfer from a small trained transformer to a larger one.
//
// Every operator places the source tensor as the leading block of the target
// tensor and fills the rest with zeros (or identity-like values for LN
// gains), so that block matrix multiplication reproduces the source
// activations on the original dimensions while the new dimensions stay zero
// in the residual stream. The only inexact step is LayerNorm: its mean and
// variance are taken over the grown width.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ttfr/config.hpp"
#include "ttfr/model.hpp"

namespace ttfr {

// add-heads keeps d_head and appends heads; widen-heads keeps n_heads and
// zero-pads each head to the new d_head.
enum class HeadMode { kAddHeads, kWidenHeads };
enum class DepthInit { kZeroIdentity, kSmallRandom };
enum class PosInit { kZeros, kSmallRandom };
enum class EquivalenceClass { kExact, kExactModuloLayerNorm };

std::string_view to_string(HeadMode m);
std::string_view to_string(DepthInit m);
std::string_view to_string(PosInit m);
std::string_view to_string(EquivalenceClass c);
EquivalenceClass parse_equivalence_class(std::string_view s);

struct GrowthPlan {
  ModelConfig source_cfg;
  ModelConfig target_cfg;
  HeadMode head_mode = HeadMode::kAddHeads;
  bool scale_compensation = true;  // widen-heads only
  DepthInit depth_init = DepthInit::kZeroIdentity;
  double small_std = 0.002;
  PosInit new_pos_init = PosInit::kZeros;
  uint64_t seed = 0;

  // Throws PlanError naming the violated invariant.
  void validate() const;
};

void to_json(nlohmann::json& j, const GrowthPlan& plan);
void from_json(const nlohmann::json& j, GrowthPlan& plan);
GrowthPlan load_plan_file(const std::string& path);

// kExact when the grown model reproduces the source logits up to float
// rounding: identity new blocks, attention scores preserved, and LayerNorm
// either disabled or never normalizing over a grown width.
EquivalenceClass classify(const GrowthPlan& plan);

// Structural classification from the two shapes alone, assuming the
// default function-preserving choices. Used when no plan is at hand.
EquivalenceClass classify_configs(const ModelConfig& source, const ModelConfig& target);

// Columns [0, d) copied, [d, d_target) zero. Used for tok_emb, pos_emb,
// type_emb and an untied lm_head.
template <typename T>
BasicMatrix<T> grow_embedding(const BasicMatrix<T>& e, size_t d_target);

// Top-left block copied, everything else zero; bias zero-padded.
template <typename T>
std::pair<BasicMatrix<T>, std::vector<T>> grow_linear(const BasicMatrix<T>& w,
                                                      const std::vector<T>& b, size_t rows,
                                                      size_t cols);

// Grows q/k/v/o (and their biases) of one layer to the plan's target shape.
// The feed-forward and LN tensors are returned unchanged.
template <typename T>
LayerWeights<T> grow_attention(const LayerWeights<T>& layer, const GrowthPlan& plan);

// First d entries copied; new gains 1, new biases 0.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> grow_layer_norm(const std::vector<T>& gain,
                                                          const std::vector<T>& bias,
                                                          size_t d_target);

// Appends target_cfg.n_layers - layers.size() new blocks on top of layers,
// which must already have target width. zero-identity: o and ff2 (weights
// and biases) zero, q/k/v/ff1 ~ N(0, small_std). small-random: every weight
// matrix ~ N(0, small_std). Biases zero and LN gains one in both modes.
template <typename T>
std::vector<LayerWeights<T>> grow_depth(std::vector<LayerWeights<T>> layers,
                                        const GrowthPlan& plan, Rng& rng);

template <typename T>
struct GrowthResult {
  ModelWeights<T> weights;
  EquivalenceClass equivalence_class;
};

// Full transfer. Random draws (new position rows, then new layers bottom to
// top in canonical tensor order) come from Rng(plan.seed). Sub-operation
// failures are rethrown as PlanError prefixed with the tensor name.
template <typename T>
GrowthResult<T> grow_model(const ModelWeights<T>& w, const GrowthPlan& plan);

}  // namespace ttfr
