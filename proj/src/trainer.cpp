// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttfr/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <utility>

#include "ttfr/errors.hpp"
#include "ttfr/rng.hpp"

namespace ttfr {

void TrainConfig::validate(const ModelConfig& model) const {
  if (!(lr > 0.0)) throw ParameterError("train: lr must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ParameterError("train: adam_beta1 not in [0,1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ParameterError("train: adam_beta2 not in [0,1)");
  if (!(adam_eps > 0.0)) throw ParameterError("train: adam_eps must be > 0");
  if (batch_size < 1) throw ParameterError("train: batch_size must be >= 1");
  if (seq_len < 2) throw ParameterError("train: seq_len must be >= 2");
  if (seq_len > model.max_seq_len) {
    throw ParameterError("train: seq_len must not exceed max_seq_len " +
                         std::to_string(model.max_seq_len));
  }
  if (steps < 1) throw ParameterError("train: steps must be >= 1");
  if (log_every < 1) throw ParameterError("train: log_every must be >= 1");
}

template <typename T>
double adam_step(const ModelConfig& cfg, ModelWeights<T>& w, ModelWeights<T> grads,
                 OptimizerState<T>& state, const TrainConfig& tcfg) {
  auto wv = tensor_views(cfg, w);
  auto gv = tensor_views(cfg, grads);
  auto mv = tensor_views(cfg, state.m);
  auto vv = tensor_views(cfg, state.v);
  if (wv.size() != gv.size() || wv.size() != mv.size() || wv.size() != vv.size()) {
    throw ShapeError("adam_step: tensor count mismatch");
  }
  for (size_t t = 0; t < wv.size(); ++t) {
    if (wv[t].shape != gv[t].shape || wv[t].shape != mv[t].shape || wv[t].shape != vv[t].shape) {
      throw ShapeError("adam_step: shape mismatch on '" + wv[t].name + "'");
    }
  }

  const double norm = global_norm(cfg, grads);
  if (tcfg.grad_clip_norm > 0.0 && norm > tcfg.grad_clip_norm) {
    const T s = static_cast<T>(tcfg.grad_clip_norm / norm);
    for (auto& g : gv) {
      for (T& x : g.data) x *= s;
    }
  }

  state.step += 1;
  const double step = static_cast<double>(state.step);
  const T b1 = static_cast<T>(tcfg.adam_beta1);
  const T b2 = static_cast<T>(tcfg.adam_beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(tcfg.adam_beta1, step));
  const T c2 = static_cast<T>(1.0 - std::pow(tcfg.adam_beta2, step));
  const T lr = static_cast<T>(tcfg.lr);
  const T eps = static_cast<T>(tcfg.adam_eps);
  for (size_t t = 0; t < wv.size(); ++t) {
    auto wd = wv[t].data;
    auto gd = gv[t].data;
    auto md = mv[t].data;
    auto vd = vv[t].data;
    for (size_t i = 0; i < wd.size(); ++i) {
      md[i] = b1 * md[i] + (T{1} - b1) * gd[i];
      vd[i] = b2 * vd[i] + (T{1} - b2) * gd[i] * gd[i];
      const T mhat = md[i] / c1;
      const T vhat = vd[i] / c2;
      wd[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  return norm;
}

int CharTokenizer::mask_id() const {
  if (!extras_) throw UnsupportedError("tokenizer has no [MASK] id without encoder extras");
  return 256;
}

std::vector<int> CharTokenizer::encode(std::string_view bytes) const {
  std::vector<int> ids;
  ids.reserve(bytes.size());
  for (char c : bytes) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

std::string CharTokenizer::decode(std::span<const int> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id > 255) {
      throw InputError("decode: id " + std::to_string(id) + " is not a byte");
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  }
  return out;
}

template <typename T>
TrainResult<T> train(const ModelConfig& cfg, ModelWeights<T> w, std::span<const int> corpus,
                     const TrainConfig& tcfg) {
  if (cfg.is_encoder()) throw UnsupportedError("train: decoder-causal model required");
  tcfg.validate(cfg);
  check_shapes(cfg, w);
  if (corpus.size() < tcfg.seq_len + 1) {
    throw InputError("train: corpus of " + std::to_string(corpus.size()) +
                     " tokens is shorter than seq_len + 1");
  }
  for (int t : corpus) {
    if (t < 0 || static_cast<size_t>(t) >= cfg.vocab_size) {
      throw InputError("train: corpus token " + std::to_string(t) + " outside the vocabulary");
    }
  }

  TrainResult<T> result;
  OptimizerState<T> state = OptimizerState<T>::Init(cfg);
  Rng rng(tcfg.seed);
  const size_t window = tcfg.seq_len;
  const size_t n_starts = corpus.size() - window + 1;
  std::vector<size_t> starts(tcfg.batch_size);
  std::vector<GradResult<T>> items(tcfg.batch_size);

  for (size_t step = 0; step < tcfg.steps; ++step) {
    for (auto& s : starts) s = static_cast<size_t>(rng.below(n_starts));

    std::exception_ptr error;
#pragma omp parallel for schedule(static) if (tcfg.batch_size > 1)
    for (size_t b = 0; b < tcfg.batch_size; ++b) {
      try {
        items[b] = backward(cfg, w, corpus.subspan(starts[b], window));
      } catch (...) {
#pragma omp critical
        error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);

    // Fixed batch-index order keeps the reduction deterministic.
    ModelWeights<T> grads = std::move(items[0].grads);
    double loss = items[0].loss;
    auto acc = tensor_views(cfg, grads);
    for (size_t b = 1; b < tcfg.batch_size; ++b) {
      loss += items[b].loss;
      const auto src = tensor_views(cfg, std::as_const(items[b].grads));
      for (size_t t = 0; t < acc.size(); ++t) {
        for (size_t i = 0; i < acc[t].data.size(); ++i) acc[t].data[i] += src[t].data[i];
      }
    }
    const T inv = T{1} / static_cast<T>(tcfg.batch_size);
    for (auto& v : acc) {
      for (T& x : v.data) x *= inv;
    }
    loss /= static_cast<double>(tcfg.batch_size);
    if (step % tcfg.log_every == 0) result.log.push_back({step, loss});
    adam_step(cfg, w, std::move(grads), state, tcfg);
  }
  result.weights = std::move(w);
  return result;
}

std::string loss_csv(std::span<const LossPoint> log) {
  std::ostringstream out;
  out << "step,loss\n";
  char buf[64];
  for (const auto& p : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", p.step, p.loss);
    out << buf;
  }
  return out.str();
}

void write_loss_csv(const std::string& path, std::span<const LossPoint> log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open loss log '" + path + "' for writing");
  out << loss_csv(log);
  if (!out) throw IoError("failed writing loss log '" + path + "'");
}

template double adam_step(const ModelConfig&, ModelWeights<float>&, ModelWeights<float>,
                          OptimizerState<float>&, const TrainConfig&);
template double adam_step(const ModelConfig&, ModelWeights<double>&, ModelWeights<double>,
                          OptimizerState<double>&, const TrainConfig&);
template TrainResult<float> train(const ModelConfig&, ModelWeights<float>, std::span<const int>,
                                  const TrainConfig&);
template TrainResult<double> train(const ModelConfig&, ModelWeights<double>, std::span<const int>,
                                   const TrainConfig&);

}  // namespace ttfr
