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
#include <memory>
#include <string>
#include <vector>

#include "cfhrm/rng.hpp"
#include "cfhrm/tensor.hpp"

namespace cfhrm {

// Projection weights are stored [out, in] and applied as x * W^T; no biases.
struct BlockWeights {
  Tensor wq;          // [d, d]
  Tensor wk;          // [n_kv * d_h, d]
  Tensor wv;          // [n_kv * d_h, d]
  Tensor wo;          // [d, d]
  Tensor w_up;        // [4d, d]
  Tensor w_gate;      // [4d, d]
  Tensor w_down;      // [d, 4d]
  Tensor gamma_attn;  // [d]
  Tensor gamma_mlp;   // [d]

  // (suffix, tensor) pairs in a fixed order; names are stable across versions.
  std::vector<std::pair<std::string, Tensor>> named() const;
};

struct AttentionLayout {
  std::int64_t d_model = 0;
  std::int64_t n_heads = 0;
  std::int64_t n_kv_heads = 0;

  std::int64_t head_dim() const { return d_model / n_heads; }
  std::int64_t kv_dim() const { return n_kv_heads * head_dim(); }
  // Throws ConfigError when d_model, n_heads, n_kv_heads are inconsistent.
  void validate() const;
};

// Normal(0, init_std) projections, unit norm gains.
BlockWeights init_block(const AttentionLayout& layout, Rng& rng, float init_std);

// cos/sin of position * theta_i for i in [0, head_dim / 2), interleaved pairs.
class RopeTable {
 public:
  RopeTable(std::int64_t max_positions, std::int64_t head_dim, double theta = 10000.0);

  std::int64_t positions() const { return positions_; }
  std::int64_t pairs() const { return pairs_; }
  double theta() const { return theta_; }
  float cos(std::int64_t pos, std::int64_t pair) const { return (*cos_)[pos * pairs_ + pair]; }
  float sin(std::int64_t pos, std::int64_t pair) const { return (*sin_)[pos * pairs_ + pair]; }

 private:
  std::int64_t positions_;
  std::int64_t pairs_;
  double theta_;
  // Shared so copies captured by backward rules stay cheap.
  std::shared_ptr<const std::vector<float>> cos_;
  std::shared_ptr<const std::vector<float>> sin_;
};

// Rotates each (x[2i], x[2i+1]) of a [B, heads, T, d_h] tensor by the angle of
// absolute position position_offset + t.
Tensor apply_rope(const Tensor& x, const RopeTable& table, std::int64_t position_offset = 0);

// Scaled dot-product attention with grouped KV heads.
// q: [B, Hq, T, d_h], k/v: [B, Hkv, T, d_h] -> [B, Hq, T, d_h].
Tensor grouped_attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal);

struct BlockContext {
  AttentionLayout layout;
  float rms_eps = 1e-6f;
  float dropout = 0.0f;
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

// x: [B, T, d] -> [B, T, d]; projections, RoPE, grouped attention, output projection.
Tensor gqa_attention(const Tensor& x, const BlockWeights& w, const RopeTable& rope,
                     const AttentionLayout& layout, bool causal = true);

// W_down(SiLU(W_up x) * W_gate x), dropout on the result in training mode.
Tensor swiglu_mlp(const Tensor& x, const BlockWeights& w, const BlockContext& ctx);

// Pre-norm residual block: h' = h + Attn(RMSNorm(h)); h'' = h' + MLP(RMSNorm(h')).
Tensor block_forward(const Tensor& h, const BlockWeights& w, const RopeTable& rope,
                     const BlockContext& ctx);

// Applies blocks in order.
Tensor stack_forward(const Tensor& h, const std::vector<BlockWeights>& blocks, const RopeTable& rope,
                     const BlockContext& ctx);

}  // namespace cfhrm
