// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttfr/growth.hpp"

#include <cmath>
#include <fstream>
#include <tuple>

#include "ttfr/errors.hpp"
#include "ttfr/kernels.hpp"
#include "ttfr/rng.hpp"

namespace ttfr {

std::string_view to_string(HeadMode m) {
  return m == HeadMode::kAddHeads ? "add-heads" : "widen-heads";
}
std::string_view to_string(DepthInit m) {
  return m == DepthInit::kZeroIdentity ? "zero-identity" : "small-random";
}
std::string_view to_string(PosInit m) { return m == PosInit::kZeros ? "zeros" : "small-random"; }
std::string_view to_string(EquivalenceClass c) {
  return c == EquivalenceClass::kExact ? "exact" : "exact-modulo-layernorm";
}

EquivalenceClass parse_equivalence_class(std::string_view s) {
  if (s == "exact") return EquivalenceClass::kExact;
  if (s == "exact-modulo-layernorm") return EquivalenceClass::kExactModuloLayerNorm;
  throw ParameterError("unknown equivalence class '" + std::string(s) + "'");
}

namespace {

HeadMode parse_head_mode(std::string_view s) {
  if (s == "add-heads") return HeadMode::kAddHeads;
  if (s == "widen-heads") return HeadMode::kWidenHeads;
  throw PlanError("unknown head_mode '" + std::string(s) + "'");
}

DepthInit parse_depth_init(std::string_view s) {
  if (s == "zero-identity") return DepthInit::kZeroIdentity;
  if (s == "small-random") return DepthInit::kSmallRandom;
  throw PlanError("unknown depth_init '" + std::string(s) + "'");
}

PosInit parse_pos_init(std::string_view s) {
  if (s == "zeros") return PosInit::kZeros;
  if (s == "small-random") return PosInit::kSmallRandom;
  throw PlanError("unknown new_pos_init '" + std::string(s) + "'");
}

void require_dominates(size_t source, size_t target, const char* field) {
  if (target < source) {
    throw PlanError(std::string("target dims must dominate source: ") + field + " " +
                    std::to_string(source) + " -> " + std::to_string(target));
  }
}

void require_equal(bool equal, const char* what) {
  if (!equal) throw PlanError(std::string("source and target must agree on ") + what);
}

bool ln_exact(const ModelConfig& s, const ModelConfig& t) {
  if (!s.ln_enabled) return true;
  // Normalizing over a grown width rescales the preserved coordinates. A
  // post-LN identity block would renormalize an already normalized stream.
  return s.d_model == t.d_model && (s.n_layers == t.n_layers || s.ln_mode == LnMode::kPre);
}

template <typename T>
void fill_normal(BasicMatrix<T>& m, Rng& rng, double std) {
  m = sample_normal<T>(rng, 0.0, std, m.rows(), m.cols());
}

template <typename F>
auto named(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw PlanError(name + ": " + e.what());
  }
}

}  // namespace

void GrowthPlan::validate() const {
  try {
    source_cfg.validate();
    target_cfg.validate();
  } catch (const ParameterError& e) {
    throw PlanError(e.what());
  }
  const ModelConfig& s = source_cfg;
  const ModelConfig& t = target_cfg;
  require_equal(s.arch == t.arch, "arch");
  if (s.vocab_size != t.vocab_size) {
    throw PlanError("vocabulary growth is not supported: vocab_size " +
                    std::to_string(s.vocab_size) + " -> " + std::to_string(t.vocab_size));
  }
  require_equal(s.ln_mode == t.ln_mode, "ln_mode");
  require_equal(s.ln_enabled == t.ln_enabled, "ln_enabled");
  require_equal(s.tie_lm_head == t.tie_lm_head, "tie_lm_head");
  require_equal(s.use_token_type == t.use_token_type, "use_token_type");
  require_dominates(s.d_model, t.d_model, "d_model");
  require_dominates(s.n_layers, t.n_layers, "n_layers");
  require_dominates(s.n_heads, t.n_heads, "n_heads");
  require_dominates(s.d_head, t.d_head, "d_head");
  require_dominates(s.d_ff, t.d_ff, "d_ff");
  require_dominates(s.max_seq_len, t.max_seq_len, "max_seq_len");
  if (head_mode == HeadMode::kAddHeads && s.d_head != t.d_head) {
    throw PlanError("add-heads requires target d_head == source d_head");
  }
  if (head_mode == HeadMode::kWidenHeads && s.n_heads != t.n_heads) {
    throw PlanError("widen-heads requires target n_heads == source n_heads");
  }
  if (!(small_std >= 0.0) || !std::isfinite(small_std)) {
    throw PlanError("small_std must be finite and >= 0");
  }
}

EquivalenceClass classify(const GrowthPlan& plan) {
  const ModelConfig& s = plan.source_cfg;
  const ModelConfig& t = plan.target_cfg;
  const bool identity_blocks = s.n_layers == t.n_layers ||
                               plan.depth_init == DepthInit::kZeroIdentity ||
                               plan.small_std == 0.0;
  const bool scores_preserved = !(plan.head_mode == HeadMode::kWidenHeads &&
                                  s.d_head != t.d_head && !plan.scale_compensation);
  return identity_blocks && scores_preserved && ln_exact(s, t)
             ? EquivalenceClass::kExact
             : EquivalenceClass::kExactModuloLayerNorm;
}

EquivalenceClass classify_configs(const ModelConfig& source, const ModelConfig& target) {
  return ln_exact(source, target) ? EquivalenceClass::kExact
                                  : EquivalenceClass::kExactModuloLayerNorm;
}

void to_json(nlohmann::json& j, const GrowthPlan& plan) {
  j = nlohmann::json{
      {"source_cfg", plan.source_cfg},
      {"target_cfg", plan.target_cfg},
      {"head_mode", std::string(to_string(plan.head_mode))},
      {"scale_compensation", plan.scale_compensation},
      {"depth_init", std::string(to_string(plan.depth_init))},
      {"small_std", plan.small_std},
      {"new_pos_init", std::string(to_string(plan.new_pos_init))},
      {"seed", plan.seed},
  };
}

void from_json(const nlohmann::json& j, GrowthPlan& plan) {
  if (!j.is_object()) throw PlanError("plan: expected a JSON object");
  try {
    plan.source_cfg = j.at("source_cfg").get<ModelConfig>();
    plan.target_cfg = j.at("target_cfg").get<ModelConfig>();
    plan.head_mode = parse_head_mode(j.value("head_mode", std::string("add-heads")));
    plan.scale_compensation = j.value("scale_compensation", true);
    plan.depth_init = parse_depth_init(j.value("depth_init", std::string("zero-identity")));
    plan.small_std = j.value("small_std", 0.002);
    plan.new_pos_init = parse_pos_init(j.value("new_pos_init", std::string("zeros")));
    plan.seed = j.value("seed", uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(std::string("plan: ") + e.what());
  } catch (const ParameterError& e) {
    throw PlanError(std::string("plan: ") + e.what());
  }
}

GrowthPlan load_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw PlanError("plan '" + path + "': " + e.what());
  }
  return j.get<GrowthPlan>();
}

template <typename T>
BasicMatrix<T> grow_embedding(const BasicMatrix<T>& e, size_t d_target) {
  if (d_target < e.cols()) {
    throw PlanError("target dims must dominate source: embedding width " +
                    std::to_string(e.cols()) + " -> " + std::to_string(d_target));
  }
  return pad_zeros(e, e.rows(), d_target);
}

template <typename T>
std::pair<BasicMatrix<T>, std::vector<T>> grow_linear(const BasicMatrix<T>& w,
                                                      const std::vector<T>& b, size_t rows,
                                                      size_t cols) {
  if (b.size() != w.rows()) {
    throw PlanError("bias length " + std::to_string(b.size()) + " != weight rows " +
                    std::to_string(w.rows()));
  }
  if (rows < w.rows() || cols < w.cols()) {
    throw PlanError("target dims must dominate source: " + shape_string(w.rows(), w.cols()) +
                    " -> " + shape_string(rows, cols));
  }
  return {pad_zeros(w, rows, cols), pad_zeros<T>(std::span<const T>(b), rows)};
}

namespace {

// Row h*src_dh + j of a (src_inner x src_d) projection lands at row
// h*dst_dh + j of the (dst_inner x dst_d) result. With equal head widths this
// is plain zero padding (add-heads); otherwise each head is padded at its
// own tail (widen-heads).
template <typename T>
std::pair<BasicMatrix<T>, std::vector<T>> scatter_head_rows(
    const BasicMatrix<T>& w, const std::vector<T>& b, const ModelConfig& s, const ModelConfig& t,
    bool rescale, T scale) {
  if (w.rows() != s.inner_dim() || w.cols() != s.d_model || b.size() != s.inner_dim()) {
    throw PlanError("projection shape does not match source config");
  }
  BasicMatrix<T> out(t.inner_dim(), t.d_model);
  std::vector<T> bias(t.inner_dim(), T{0});
  for (size_t h = 0; h < s.n_heads; ++h) {
    for (size_t j = 0; j < s.d_head; ++j) {
      const size_t src = h * s.d_head + j;
      const size_t dst = h * t.d_head + j;
      auto in = w.row(src);
      auto o = out.row(dst);
      for (size_t c = 0; c < in.size(); ++c) o[c] = rescale ? in[c] * scale : in[c];
      bias[dst] = rescale ? b[src] * scale : b[src];
    }
  }
  return {std::move(out), std::move(bias)};
}

template <typename T>
BasicMatrix<T> scatter_head_cols(const BasicMatrix<T>& w, const ModelConfig& s,
                                 const ModelConfig& t) {
  if (w.rows() != s.d_model || w.cols() != s.inner_dim()) {
    throw PlanError("output projection shape does not match source config");
  }
  BasicMatrix<T> out(t.d_model, t.inner_dim());
  for (size_t r = 0; r < s.d_model; ++r) {
    for (size_t h = 0; h < s.n_heads; ++h) {
      for (size_t j = 0; j < s.d_head; ++j) out(r, h * t.d_head + j) = w(r, h * s.d_head + j);
    }
  }
  return out;
}

}  // namespace

template <typename T>
LayerWeights<T> grow_attention(const LayerWeights<T>& layer, const GrowthPlan& plan) {
  const ModelConfig& s = plan.source_cfg;
  const ModelConfig& t = plan.target_cfg;
  if (plan.head_mode == HeadMode::kAddHeads && s.d_head != t.d_head) {
    throw PlanError("add-heads requires target d_head == source d_head");
  }
  if (plan.head_mode == HeadMode::kWidenHeads && s.n_heads != t.n_heads) {
    throw PlanError("widen-heads requires target n_heads == source n_heads");
  }
  // Scores are divided by sqrt(d_head); scaling the copied queries by
  // sqrt(d_head'/d_head) cancels the change.
  const bool rescale = plan.head_mode == HeadMode::kWidenHeads && plan.scale_compensation &&
                       t.d_head != s.d_head;
  const T scale = static_cast<T>(std::sqrt(static_cast<double>(t.d_head) /
                                           static_cast<double>(s.d_head)));

  LayerWeights<T> out = layer;
  std::tie(out.q_w, out.q_b) = named("q", [&] { return scatter_head_rows(layer.q_w, layer.q_b, s, t, rescale, scale); });
  std::tie(out.k_w, out.k_b) = named("k", [&] { return scatter_head_rows(layer.k_w, layer.k_b, s, t, false, scale); });
  std::tie(out.v_w, out.v_b) = named("v", [&] { return scatter_head_rows(layer.v_w, layer.v_b, s, t, false, scale); });
  out.o_w = named("o", [&] { return scatter_head_cols(layer.o_w, s, t); });
  out.o_b = named("o", [&] { return pad_zeros<T>(std::span<const T>(layer.o_b), t.d_model); });
  return out;
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> grow_layer_norm(const std::vector<T>& gain,
                                                          const std::vector<T>& bias,
                                                          size_t d_target) {
  if (gain.size() != bias.size()) throw PlanError("LayerNorm gain and bias lengths differ");
  if (d_target < gain.size()) {
    throw PlanError("target dims must dominate source: LayerNorm width " +
                    std::to_string(gain.size()) + " -> " + std::to_string(d_target));
  }
  std::vector<T> g(d_target, T{1});
  std::vector<T> b(d_target, T{0});
  std::copy(gain.begin(), gain.end(), g.begin());
  std::copy(bias.begin(), bias.end(), b.begin());
  return {std::move(g), std::move(b)};
}

template <typename T>
std::vector<LayerWeights<T>> grow_depth(std::vector<LayerWeights<T>> layers,
                                        const GrowthPlan& plan, Rng& rng) {
  const ModelConfig& t = plan.target_cfg;
  if (layers.size() > t.n_layers) {
    throw PlanError("target dims must dominate source: n_layers " +
                    std::to_string(layers.size()) + " -> " + std::to_string(t.n_layers));
  }
  const double std = plan.small_std;
  while (layers.size() < t.n_layers) {
    LayerWeights<T> l = LayerWeights<T>::Zeros(t);
    fill_normal(l.q_w, rng, std);
    fill_normal(l.k_w, rng, std);
    fill_normal(l.v_w, rng, std);
    if (plan.depth_init == DepthInit::kSmallRandom) fill_normal(l.o_w, rng, std);
    fill_normal(l.ff1_w, rng, std);
    if (plan.depth_init == DepthInit::kSmallRandom) fill_normal(l.ff2_w, rng, std);
    layers.push_back(std::move(l));
  }
  return layers;
}

template <typename T>
GrowthResult<T> grow_model(const ModelWeights<T>& w, const GrowthPlan& plan) {
  plan.validate();
  const ModelConfig& s = plan.source_cfg;
  const ModelConfig& t = plan.target_cfg;
  try {
    check_shapes(s, w);
  } catch (const ShapeError& e) {
    throw PlanError(std::string("source weights do not match plan.source_cfg: ") + e.what());
  }
  Rng rng(plan.seed);

  ModelWeights<T> out;
  out.tok_emb = named("tok_emb", [&] { return grow_embedding(w.tok_emb, t.d_model); });
  out.pos_emb = named("pos_emb", [&] {
    BasicMatrix<T> p = pad_zeros(grow_embedding(w.pos_emb, t.d_model), t.max_seq_len, t.d_model);
    if (plan.new_pos_init == PosInit::kSmallRandom) {
      for (size_t r = s.max_seq_len; r < t.max_seq_len; ++r) {
        for (T& v : p.row(r)) v = static_cast<T>(plan.small_std * rng.normal());
      }
    }
    return p;
  });
  if (t.has_type_emb()) {
    out.type_emb = named("type_emb", [&] { return grow_embedding(w.type_emb, t.d_model); });
  }

  std::vector<LayerWeights<T>> layers;
  layers.reserve(t.n_layers);
  for (size_t i = 0; i < w.layers.size(); ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    const LayerWeights<T>& src = w.layers[i];
    LayerWeights<T> l = named(p + "attention", [&] { return grow_attention(src, plan); });
    std::tie(l.ln1_g, l.ln1_b) =
        named(p + "ln1", [&] { return grow_layer_norm(src.ln1_g, src.ln1_b, t.d_model); });
    std::tie(l.ff1_w, l.ff1_b) =
        named(p + "ff1", [&] { return grow_linear(src.ff1_w, src.ff1_b, t.d_ff, t.d_model); });
    std::tie(l.ff2_w, l.ff2_b) =
        named(p + "ff2", [&] { return grow_linear(src.ff2_w, src.ff2_b, t.d_model, t.d_ff); });
    std::tie(l.ln2_g, l.ln2_b) =
        named(p + "ln2", [&] { return grow_layer_norm(src.ln2_g, src.ln2_b, t.d_model); });
    layers.push_back(std::move(l));
  }
  out.layers = named("layers", [&] { return grow_depth(std::move(layers), plan, rng); });
  std::tie(out.final_ln_gain, out.final_ln_bias) = named("final_ln", [&] {
    return grow_layer_norm(w.final_ln_gain, w.final_ln_bias, t.d_model);
  });
  if (!t.tie_lm_head) {
    out.lm_head = named("lm_head", [&] { return grow_embedding(w.lm_head, t.d_model); });
  }
  check_shapes(t, out);
  return {std::move(out), classify(plan)};
}

#define TTFR_INSTANTIATE_GROWTH(T)                                                            \
  template BasicMatrix<T> grow_embedding(const BasicMatrix<T>&, size_t);                      \
  template std::pair<BasicMatrix<T>, std::vector<T>> grow_linear(                             \
      const BasicMatrix<T>&, const std::vector<T>&, size_t, size_t);                          \
  template LayerWeights<T> grow_attention(const LayerWeights<T>&, const GrowthPlan&);         \
  template std::pair<std::vector<T>, std::vector<T>> grow_layer_norm(                         \
      const std::vector<T>&, const std::vector<T>&, size_t);                                  \
  template std::vector<LayerWeights<T>> grow_depth(std::vector<LayerWeights<T>>,              \
                                                   const GrowthPlan&, Rng&);                  \
  template GrowthResult<T> grow_model(const ModelWeights<T>&, const GrowthPlan&);

TTFR_INSTANTIATE_GROWTH(float)
TTFR_INSTANTIATE_GROWTH(double)
#undef TTFR_INSTANTIATE_GROWTH

}  // namespace ttfr
