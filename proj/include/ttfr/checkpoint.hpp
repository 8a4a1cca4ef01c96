// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

// .ttfr checkpoint container, little-endian regardless of host:
//
//   offset 0   4 bytes   magic "TTFR"
//   offset 4   u32       version (1)
//   offset 8   u64       header_len
//   offset 16  header    UTF-8 JSON, keys sorted:
//                        {"config": ModelConfig,
//                         "tensors": [{"byte_len","dtype":"f32","name","offset","shape"}],
//                         ...optional extra keys}
//   payload    raw f32 data
//
// Tensor offsets are relative to the payload start. The header is padded
// with trailing spaces so that the payload starts on an 8-byte boundary, and
// every tensor offset is a multiple of 8. Tensors appear in canonical order
// (see tensor_views); a tied lm_head is not stored.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ttfr/config.hpp"
#include "ttfr/model.hpp"

namespace ttfr {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelWeights<float> weights;
  // Extra header keys; written under "metadata", ignored by validation.
  nlohmann::json metadata = nlohmann::json::object();
};

std::vector<uint8_t> serialize_checkpoint(const ModelConfig& cfg, const ModelWeights<float>& w,
                                          const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelWeights<float>& w,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::string& path);

// Payload bytes only (everything after the header).
std::vector<uint8_t> checkpoint_payload(const std::vector<uint8_t>& bytes);

std::vector<uint8_t> read_file_bytes(const std::string& path);

}  // namespace ttfr
