/*
 * Copyright 2026 The cfhrm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cfhrm/rng.hpp"
#include "cfhrm/tensor.hpp"

namespace cfhrm {

// Target id excluded from the next-token loss (padding sentinel).
inline constexpr std::int32_t kIgnoreIndex = -1;

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float s);

Tensor silu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Sum / mean of all elements, shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Batched matrix product a[..., m, k] x b[..., k, n] with broadcast leading dims.
Tensor matmul(const Tensor& a, const Tensor& b);

// x[..., in] * w^T for a weight stored as [out, in].
Tensor linear(const Tensor& x, const Tensor& w);

Tensor rms_norm(const Tensor& x, const Tensor& gamma, float eps);

Tensor softmax_last_axis(const Tensor& x);

// Mean over non-ignored rows of -log softmax(logits)[target]. `logits` is
// [..., V]; `targets` holds one id (or kIgnoreIndex) per row.
Tensor cross_entropy_next_token(const Tensor& logits, std::span<const std::int32_t> targets);

// [B, T, d] -> [B, d]
Tensor mean_pool_time(const Tensor& x);

// Row gather from table[V, d]; result shape is `index_shape` + [d].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids, const Shape& index_shape);

Tensor reshape(const Tensor& x, Shape shape);

// [A, B, C, D] -> [A, C, B, D]
Tensor transpose_12(const Tensor& x);

// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, float p, Rng& rng);

// Per-sample select along axis 0: out[b] = take_first[b] ? first[b] : second[b].
Tensor where_samples(const std::vector<bool>& take_first, const Tensor& first, const Tensor& second);

// Column `c` of a [N, C] tensor, shape [N].
Tensor column(const Tensor& x, std::int64_t c);

}  // namespace cfhrm
