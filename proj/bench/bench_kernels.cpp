// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels vs their OpenMP counterparts. Also checks that
// both produce identical bits.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "ttfr/kernels.hpp"
#include "ttfr/model.hpp"
#include "ttfr/rng.hpp"

namespace {

using ttfr::Matrix;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const std::string& name, double serial, double parallel, bool same) {
  std::printf("%-28s %10.3f %10.3f %8.2fx  %s\n", name.c_str(), serial, parallel,
              serial / parallel, same ? "identical" : "DIFFERENT");
}

}  // namespace

int main() {
  ttfr::Rng rng(1);
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  for (size_t n : {64, 128, 256, 512}) {
    const Matrix a = ttfr::sample_normal<float>(rng, 0.0, 1.0, n, n);
    const Matrix b = ttfr::sample_normal<float>(rng, 0.0, 1.0, n, n);
    const int reps = n <= 128 ? 50 : 5;
    Matrix cs, cp;
    const double ts = time_ms([&] { cs = ttfr::serial::matmul(a, b); }, reps);
    const double tp = time_ms([&] { cp = ttfr::matmul(a, b); }, reps);
    row("matmul " + std::to_string(n), ts, tp, cs == cp);
    const double ts2 = time_ms([&] { cs = ttfr::serial::matmul_tn(a, b); }, reps);
    const double tp2 = time_ms([&] { cp = ttfr::matmul_tn(a, b); }, reps);
    row("matmul_tn " + std::to_string(n), ts2, tp2, cs == cp);
  }

  for (size_t n : {128, 1024}) {
    const Matrix x = ttfr::sample_normal<float>(rng, 0.0, 1.0, n, 256);
    const std::vector<float> g(256, 1.0f), bias(256, 0.0f);
    Matrix ys, yp;
    double ts = time_ms([&] { ys = ttfr::serial::softmax_rows(x); }, 20);
    double tp = time_ms([&] { yp = ttfr::softmax_rows(x); }, 20);
    row("softmax_rows " + std::to_string(n) + "x256", ts, tp, ys == yp);
    ts = time_ms([&] { ys = ttfr::serial::layer_norm_rows<float>(x, g, bias, static_cast<float>(ttfr::kLayerNormEps)); }, 20);
    tp = time_ms([&] { yp = ttfr::layer_norm_rows<float>(x, g, bias, static_cast<float>(ttfr::kLayerNormEps)); }, 20);
    row("layer_norm_rows " + std::to_string(n) + "x256", ts, tp, ys == yp);
  }

  ttfr::ModelConfig cfg;
  cfg.vocab_size = 256;
  cfg.max_seq_len = 64;
  cfg.d_model = 128;
  cfg.n_layers = 4;
  cfg.n_heads = 8;
  cfg.d_head = 16;
  cfg.d_ff = 512;
  const auto w = ttfr::init_random<float>(cfg, rng, 0.02);
  std::vector<int> tokens(64);
  for (int& t : tokens) t = static_cast<int>(rng.below(256));
  const double tf = time_ms([&] { (void)ttfr::forward(cfg, w, tokens); }, 20);
  std::printf("%-28s %10s %10.3f\n", "forward d128 L4 T64", "-", tf);
  return 0;
}
