// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "ttfr/errors.hpp"
#include "ttfr/matrix.hpp"

namespace ttfr {

// SplitMix64 (Steele, Lea, Flood 2014). The algorithm is part of the
// checkpoint reproducibility contract:
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// uniform() takes the top 53 bits; normal() is the cosine branch of
// Box-Muller and consumes exactly two uniforms per sample.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) by 64x64->128 multiply-high.
  uint64_t below(uint64_t n) {
    if (n == 0) throw ParameterError("Rng::below: n must be positive");
    return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

// Row-major fill order.
template <typename T>
BasicMatrix<T> sample_normal(Rng& rng, double mean, double std, size_t rows, size_t cols) {
  if (!(std >= 0.0) || !std::isfinite(std)) {
    throw ParameterError("sample_normal: std must be finite and >= 0, got " +
                         std::to_string(std));
  }
  BasicMatrix<T> out(rows, cols);
  for (T& v : out.values()) v = static_cast<T>(mean + std * rng.normal());
  return out;
}

}  // namespace ttfr
