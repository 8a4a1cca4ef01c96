// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttfr/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "ttfr/errors.hpp"

namespace ttfr {

namespace {

constexpr char kMagic[4] = {'T', 'T', 'F', 'R'};
constexpr size_t kPreambleSize = 16;
constexpr size_t kAlign = 8;

size_t align_up(size_t n) { return (n + kAlign - 1) / kAlign * kAlign; }

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
  return v;
}

uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

[[noreturn]] void fail(FormatErrorKind kind, const std::string& what) {
  throw FormatError(kind, "checkpoint: " + what);
}

size_t payload_start(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(FormatErrorKind::kBadMagic, "bad magic (expected \"TTFR\")");
  }
  if (bytes.size() < kPreambleSize) fail(FormatErrorKind::kBadHeader, "truncated preamble");
  const uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    fail(FormatErrorKind::kBadVersion, "unsupported version " + std::to_string(version));
  }
  const uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - kPreambleSize) {
    fail(FormatErrorKind::kBadHeader, "header extends past end of file");
  }
  return kPreambleSize + static_cast<size_t>(header_len);
}

}  // namespace

std::vector<uint8_t> serialize_checkpoint(const ModelConfig& cfg, const ModelWeights<float>& w,
                                          const nlohmann::json& metadata) {
  cfg.validate();
  check_shapes(cfg, w);
  const auto views = tensor_views(cfg, w);

  nlohmann::json tensors = nlohmann::json::array();
  size_t offset = 0;
  for (const auto& v : views) {
    for (float x : v.data) {
      if (!std::isfinite(x)) {
        throw FormatError(FormatErrorKind::kNonFinite, "checkpoint: non-finite tensor '" + v.name + "'");
      }
    }
    const size_t byte_len = v.data.size() * sizeof(float);
    tensors.push_back({{"name", v.name},
                       {"shape", v.shape},
                       {"dtype", "f32"},
                       {"offset", offset},
                       {"byte_len", byte_len}});
    offset = align_up(offset + byte_len);
  }
  nlohmann::json header = {{"config", cfg}, {"tensors", tensors}};
  if (!metadata.is_null() && !metadata.empty()) header["metadata"] = metadata;

  std::string text = header.dump();
  text.append(align_up(kPreambleSize + text.size()) - kPreambleSize - text.size(), ' ');

  std::vector<uint8_t> out;
  out.reserve(kPreambleSize + text.size() + offset);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  const size_t base = out.size();
  for (size_t i = 0; i < views.size(); ++i) {
    out.resize(base + tensors[i]["offset"].get<size_t>(), 0);
    for (float x : views[i].data) put_u32(out, std::bit_cast<uint32_t>(x));
  }
  out.resize(base + offset, 0);
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes) {
  const size_t base = payload_start(bytes);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPreambleSize, bytes.begin() + base);
  } catch (const nlohmann::json::exception& e) {
    fail(FormatErrorKind::kBadHeader, std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("config") || !header.contains("tensors") ||
      !header["tensors"].is_array()) {
    fail(FormatErrorKind::kBadHeader, "header must hold \"config\" and a \"tensors\" array");
  }

  Checkpoint ck;
  try {
    ck.config = header["config"].get<ModelConfig>();
  } catch (const Error& e) {
    fail(FormatErrorKind::kBadHeader, e.what());
  }
  if (header.contains("metadata")) ck.metadata = header["metadata"];
  ck.weights = ModelWeights<float>::Zeros(ck.config);
  auto views = tensor_views(ck.config, ck.weights);
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < views.size(); ++i) index[views[i].name] = i;
  std::vector<bool> seen(views.size(), false);

  size_t prev_end = 0;
  bool first = true;
  for (const auto& entry : header["tensors"]) {
    std::string name;
    std::vector<size_t> shape;
    size_t offset = 0, byte_len = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<size_t>>();
      offset = entry.at("offset").get<size_t>();
      byte_len = entry.at("byte_len").get<size_t>();
      if (entry.at("dtype").get<std::string>() != "f32") {
        fail(FormatErrorKind::kBadHeader, "tensor '" + name + "' has unsupported dtype");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(FormatErrorKind::kBadHeader, std::string("malformed tensor entry: ") + e.what());
    }
    const auto it = index.find(name);
    if (it == index.end()) {
      fail(FormatErrorKind::kUnknownTensor, "tensor '" + name + "' is not part of this config");
    }
    if (seen[it->second]) fail(FormatErrorKind::kDuplicateTensor, "duplicate tensor '" + name + "'");
    seen[it->second] = true;
    auto& view = views[it->second];

    if (offset % kAlign != 0) {
      fail(FormatErrorKind::kMisaligned, "tensor '" + name + "' offset is not 8-byte aligned");
    }
    if (!first && offset < prev_end) {
      fail(FormatErrorKind::kOverlappingOffsets, "tensor '" + name + "' overlaps its predecessor");
    }
    if (shape != view.shape || byte_len != view.data.size() * sizeof(float)) {
      fail(FormatErrorKind::kShapeMismatch, "tensor '" + name + "' shape disagrees with config");
    }
    if (offset > bytes.size() - base || byte_len > bytes.size() - base - offset) {
      fail(FormatErrorKind::kPayloadOutOfBounds, "payload out of bounds for tensor '" + name + "'");
    }
    const uint8_t* p = bytes.data() + base + offset;
    for (size_t i = 0; i < view.data.size(); ++i) {
      const float x = std::bit_cast<float>(get_u32(p + 4 * i));
      if (!std::isfinite(x)) fail(FormatErrorKind::kNonFinite, "non-finite tensor '" + name + "'");
      view.data[i] = x;
    }
    prev_end = offset + byte_len;
    first = false;
  }
  for (size_t i = 0; i < views.size(); ++i) {
    if (!seen[i]) fail(FormatErrorKind::kMissingTensor, "missing tensor '" + views[i].name + "'");
  }
  return ck;
}

std::vector<uint8_t> checkpoint_payload(const std::vector<uint8_t>& bytes) {
  const size_t base = payload_start(bytes);
  return {bytes.begin() + base, bytes.end()};
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelWeights<float>& w, const nlohmann::json& metadata) {
  const auto bytes = serialize_checkpoint(cfg, w, metadata);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

}  // namespace ttfr
