// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "json.hpp"

namespace ttfr {

enum class Arch { kDecoderCausal, kEncoderBidirectional };
enum class LnMode { kPre, kPost };

std::string_view to_string(Arch arch);
std::string_view to_string(LnMode mode);
Arch parse_arch(std::string_view s);
LnMode parse_ln_mode(std::string_view s);

// Architectural hyperparameters of one transformer. The attention inner width
// n_heads * d_head may differ from d_model; Q/K/V project d_model into it and
// the output projection maps it back.
struct ModelConfig {
  Arch arch = Arch::kDecoderCausal;
  size_t vocab_size = 256;
  size_t max_seq_len = 64;
  size_t d_model = 32;
  size_t n_layers = 2;
  size_t n_heads = 4;
  size_t d_head = 8;
  size_t d_ff = 128;
  LnMode ln_mode = LnMode::kPre;
  bool ln_enabled = true;
  bool tie_lm_head = true;
  bool use_token_type = false;  // encoder only

  size_t inner_dim() const { return n_heads * d_head; }
  bool is_encoder() const { return arch == Arch::kEncoderBidirectional; }
  bool has_type_emb() const { return is_encoder() && use_token_type; }

  // Reserved ids for the encoder's toy vocabulary.
  size_t mask_id() const { return vocab_size - 1; }
  static constexpr size_t kPadId = 0;

  // Throws ParameterError naming the first violated field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Distinct trainable scalars (a tied head is counted once).
size_t parameter_count(const ModelConfig& cfg);
size_t tensor_count(const ModelConfig& cfg);

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

ModelConfig load_config_file(const std::string& path);

}  // namespace ttfr
