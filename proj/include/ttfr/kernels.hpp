// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

// Dense kernels. Two implementations live here:
//
//   ttfr::serial  textbook loops, kept as the reference for tests and benches
//   ttfr          OpenMP versions used by the model code
//
// Every output element of a product is accumulated in ascending k starting
// from zero in both implementations, so the two agree bitwise. The parallel
// versions only split work across output rows.

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "ttfr/errors.hpp"
#include "ttfr/matrix.hpp"

namespace ttfr {

namespace detail {

template <typename T>
void check_matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.rows(), a.cols()) + " x " +
                     shape_string(b.rows(), b.cols()));
  }
}

template <typename T>
void check_matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: (" + shape_string(a.rows(), a.cols()) +
                     ")^T x " + shape_string(b.rows(), b.cols()));
  }
}

template <typename T>
void softmax_row(std::span<T> row) {
  if (row.empty()) return;
  T max = row[0];
  for (T v : row) max = v > max ? v : max;
  T sum = 0;
  for (T& v : row) {
    v = std::exp(v - max);
    sum += v;
  }
  for (T& v : row) v /= sum;
}

template <typename T>
void check_layer_norm(size_t n, size_t gain, size_t bias) {
  if (n != gain || n != bias) {
    throw ShapeError("layer_norm: length " + std::to_string(n) + ", gain " +
                     std::to_string(gain) + ", bias " + std::to_string(bias));
  }
}

// Biased variance (divide by length), two-pass.
template <typename T>
void layer_norm_row(std::span<const T> x, std::span<const T> gain,
                    std::span<const T> bias, T eps, std::span<T> out) {
  const size_t n = x.size();
  T mean = 0;
  for (T v : x) mean += v;
  mean /= static_cast<T>(n);
  T var = 0;
  for (T v : x) var += (v - mean) * (v - mean);
  var /= static_cast<T>(n);
  const T rstd = T{1} / std::sqrt(var + eps);
  for (size_t i = 0; i < n; ++i) out[i] = gain[i] * ((x[i] - mean) * rstd) + bias[i];
}

}  // namespace detail

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& a) {
  BasicMatrix<T> out(a.cols(), a.rows());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

template <typename T>
BasicMatrix<T> pad_zeros(const BasicMatrix<T>& a, size_t new_rows, size_t new_cols) {
  if (new_rows < a.rows() || new_cols < a.cols()) {
    throw ShapeError("pad_zeros: cannot shrink " + shape_string(a.rows(), a.cols()) +
                     " to " + shape_string(new_rows, new_cols));
  }
  BasicMatrix<T> out(new_rows, new_cols);
  for (size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
std::vector<T> pad_zeros(std::span<const T> v, size_t new_len) {
  if (new_len < v.size()) {
    throw ShapeError("pad_zeros: cannot shrink vector of " + std::to_string(v.size()) +
                     " to " + std::to_string(new_len));
  }
  std::vector<T> out(new_len, T{0});
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

// tanh approximation; this exact expression is normative.
template <typename T>
T gelu(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T k = static_cast<T>(0.044715);
  return T{0.5} * x * (T{1} + std::tanh(c * (x + k * x * x * x)));
}

template <typename T>
T gelu_derivative(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T k = static_cast<T>(0.044715);
  const T t = std::tanh(c * (x + k * x * x * x));
  return T{0.5} * (T{1} + t) + T{0.5} * x * (T{1} - t * t) * c * (T{1} + T{3} * k * x * x);
}

template <typename T>
std::vector<T> layer_norm(std::span<const T> x, std::span<const T> gain,
                          std::span<const T> bias, T eps) {
  detail::check_layer_norm<T>(x.size(), gain.size(), bias.size());
  std::vector<T> out(x.size());
  if (!x.empty()) detail::layer_norm_row<T>(x, gain, bias, eps, out);
  return out;
}

namespace serial {

template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::check_matmul(a, b);
  BasicMatrix<T> c(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t j = 0; j < b.cols(); ++j) {
      T sum = 0;
      for (size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
      c(i, j) = sum;
    }
  }
  return c;
}

// a^T * b
template <typename T>
BasicMatrix<T> matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::check_matmul_tn(a, b);
  BasicMatrix<T> c(a.cols(), b.cols());
  for (size_t i = 0; i < a.cols(); ++i) {
    for (size_t j = 0; j < b.cols(); ++j) {
      T sum = 0;
      for (size_t k = 0; k < a.rows(); ++k) sum += a(k, i) * b(k, j);
      c(i, j) = sum;
    }
  }
  return c;
}

template <typename T>
BasicMatrix<T> softmax_rows(const BasicMatrix<T>& a) {
  BasicMatrix<T> out = a;
  for (size_t i = 0; i < out.rows(); ++i) detail::softmax_row(out.row(i));
  return out;
}

template <typename T>
BasicMatrix<T> layer_norm_rows(const BasicMatrix<T>& x, std::span<const T> gain,
                               std::span<const T> bias, T eps) {
  detail::check_layer_norm<T>(x.cols(), gain.size(), bias.size());
  BasicMatrix<T> out(x.rows(), x.cols());
  for (size_t i = 0; i < x.rows(); ++i) {
    detail::layer_norm_row<T>(x.row(i), gain, bias, eps, out.row(i));
  }
  return out;
}

template <typename T>
BasicMatrix<T> gelu(const BasicMatrix<T>& x) {
  BasicMatrix<T> out(x.rows(), x.cols());
  for (size_t i = 0; i < x.size(); ++i) out.values()[i] = ttfr::gelu(x.values()[i]);
  return out;
}

}  // namespace serial

// Row-parallel i-k-j product; the j loop vectorizes while every c(i, j)
// still sums its k terms in ascending order.
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::check_matmul(a, b);
  const size_t m = a.rows(), n = b.cols(), kk = a.cols();
  BasicMatrix<T> c(m, n);
  const T* ap = a.data();
  const T* bp = b.data();
  T* cp = c.data();
#pragma omp parallel for schedule(static) if (m * n * kk > 32768)
  for (size_t i = 0; i < m; ++i) {
    T* crow = cp + i * n;
    for (size_t k = 0; k < kk; ++k) {
      const T aik = ap[i * kk + k];
      const T* brow = bp + k * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

template <typename T>
BasicMatrix<T> matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::check_matmul_tn(a, b);
  const size_t m = a.cols(), n = b.cols(), kk = a.rows();
  BasicMatrix<T> c(m, n);
  const T* ap = a.data();
  const T* bp = b.data();
  T* cp = c.data();
#pragma omp parallel for schedule(static) if (m * n * kk > 32768)
  for (size_t i = 0; i < m; ++i) {
    T* crow = cp + i * n;
    for (size_t k = 0; k < kk; ++k) {
      const T aki = ap[k * m + i];
      const T* brow = bp + k * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

// a * b^T
template <typename T>
BasicMatrix<T> matmul_nt(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a.rows(), a.cols()) + " x (" +
                     shape_string(b.rows(), b.cols()) + ")^T");
  }
  return matmul(a, transpose(b));
}

template <typename T>
BasicMatrix<T> softmax_rows(const BasicMatrix<T>& a) {
  BasicMatrix<T> out = a;
#pragma omp parallel for schedule(static) if (a.size() > 16384)
  for (size_t i = 0; i < out.rows(); ++i) detail::softmax_row(out.row(i));
  return out;
}

template <typename T>
BasicMatrix<T> layer_norm_rows(const BasicMatrix<T>& x, std::span<const T> gain,
                               std::span<const T> bias, T eps) {
  detail::check_layer_norm<T>(x.cols(), gain.size(), bias.size());
  BasicMatrix<T> out(x.rows(), x.cols());
#pragma omp parallel for schedule(static) if (x.size() > 16384)
  for (size_t i = 0; i < x.rows(); ++i) {
    detail::layer_norm_row<T>(x.row(i), gain, bias, eps, out.row(i));
  }
  return out;
}

template <typename T>
BasicMatrix<T> gelu(const BasicMatrix<T>& x) {
  BasicMatrix<T> out(x.rows(), x.cols());
  const T* in = x.data();
  T* o = out.data();
  const size_t n = x.size();
#pragma omp parallel for schedule(static) if (n > 16384)
  for (size_t i = 0; i < n; ++i) o[i] = gelu(in[i]);
  return out;
}

}  // namespace ttfr
