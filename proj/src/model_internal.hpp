// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "ttfr/model.hpp"

namespace ttfr::internal {

// x * W^T + b, row-wise bias.
template <typename T>
BasicMatrix<T> linear(const BasicMatrix<T>& x, const BasicMatrix<T>& w, std::span<const T> b);

// Row-wise LayerNorm with eps = kLayerNormEps, recording xhat and 1/std.
template <typename T>
BasicMatrix<T> layer_norm_cached(const BasicMatrix<T>& x, std::span<const T> gain,
                                 std::span<const T> bias, LnCache<T>& cache);

void check_mlm_targets(const ModelConfig& cfg, std::span<const int> tokens,
                       std::span<const size_t> masked_positions, std::span<const int> original_ids);

}  // namespace ttfr::internal
