// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttfr/config.hpp"

#include <fstream>

#include "ttfr/errors.hpp"

namespace ttfr {

std::string_view to_string(Arch arch) {
  return arch == Arch::kDecoderCausal ? "decoder-causal" : "encoder-bidirectional";
}

std::string_view to_string(LnMode mode) { return mode == LnMode::kPre ? "pre" : "post"; }

Arch parse_arch(std::string_view s) {
  if (s == "decoder-causal") return Arch::kDecoderCausal;
  if (s == "encoder-bidirectional") return Arch::kEncoderBidirectional;
  throw ParameterError("unknown arch '" + std::string(s) + "'");
}

LnMode parse_ln_mode(std::string_view s) {
  if (s == "pre") return LnMode::kPre;
  if (s == "post") return LnMode::kPost;
  throw ParameterError("unknown ln_mode '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto positive = [](size_t v, const char* name) {
    if (v < 1) throw ParameterError(std::string("config: ") + name + " must be >= 1");
  };
  positive(max_seq_len, "max_seq_len");
  positive(d_model, "d_model");
  positive(n_layers, "n_layers");
  positive(n_heads, "n_heads");
  positive(d_head, "d_head");
  positive(d_ff, "d_ff");
  if (vocab_size < 2) throw ParameterError("config: vocab_size must be >= 2");
  if (use_token_type && !is_encoder()) {
    throw ParameterError("config: use_token_type requires encoder-bidirectional");
  }
}

size_t parameter_count(const ModelConfig& cfg) {
  const size_t d = cfg.d_model, inner = cfg.inner_dim(), ff = cfg.d_ff;
  size_t per_layer = 3 * (inner * d + inner)  // q, k, v
                     + d * inner + d          // o
                     + ff * d + ff            // ff1
                     + d * ff + d             // ff2
                     + 4 * d;                 // ln1, ln2
  size_t total = cfg.vocab_size * d + cfg.max_seq_len * d + cfg.n_layers * per_layer + 2 * d;
  if (cfg.has_type_emb()) total += 2 * d;
  if (!cfg.tie_lm_head) total += cfg.vocab_size * d;
  return total;
}

size_t tensor_count(const ModelConfig& cfg) {
  return 2 + (cfg.has_type_emb() ? 1 : 0) + 16 * cfg.n_layers + 2 + (cfg.tie_lm_head ? 0 : 1);
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = nlohmann::json{
      {"arch", std::string(to_string(cfg.arch))},
      {"vocab_size", cfg.vocab_size},
      {"max_seq_len", cfg.max_seq_len},
      {"d_model", cfg.d_model},
      {"n_layers", cfg.n_layers},
      {"n_heads", cfg.n_heads},
      {"d_head", cfg.d_head},
      {"d_ff", cfg.d_ff},
      {"ln_mode", std::string(to_string(cfg.ln_mode))},
      {"ln_enabled", cfg.ln_enabled},
      {"tie_lm_head", cfg.tie_lm_head},
      {"use_token_type", cfg.use_token_type},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  if (!j.is_object()) throw ParameterError("config: expected a JSON object");
  try {
    cfg.arch = parse_arch(j.at("arch").get<std::string>());
    cfg.vocab_size = j.at("vocab_size").get<size_t>();
    cfg.max_seq_len = j.at("max_seq_len").get<size_t>();
    cfg.d_model = j.at("d_model").get<size_t>();
    cfg.n_layers = j.at("n_layers").get<size_t>();
    cfg.n_heads = j.at("n_heads").get<size_t>();
    cfg.d_head = j.at("d_head").get<size_t>();
    cfg.d_ff = j.at("d_ff").get<size_t>();
    cfg.ln_mode = parse_ln_mode(j.at("ln_mode").get<std::string>());
    cfg.ln_enabled = j.at("ln_enabled").get<bool>();
    cfg.tie_lm_head = j.at("tie_lm_head").get<bool>();
    cfg.use_token_type = j.value("use_token_type", false);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  cfg.validate();
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("config '" + path + "': " + e.what());
  }
  return j.get<ModelConfig>();
}

}  // namespace ttfr
