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

#include "cfhrm/transformer.hpp"

#include <cmath>
#include <limits>

#include "cfhrm/errors.hpp"
#include "cfhrm/ops.hpp"

namespace cfhrm {

namespace {

Tensor normal_tensor(Shape shape, Rng& rng, float stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal(0.0f, stddev);
  return t.set_requires_grad();
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> BlockWeights::named() const {
  return {{"wq", wq},         {"wk", wk},         {"wv", wv},
          {"wo", wo},         {"w_up", w_up},     {"w_gate", w_gate},
          {"w_down", w_down}, {"gamma_attn", gamma_attn}, {"gamma_mlp", gamma_mlp}};
}

void AttentionLayout::validate() const {
  if (d_model < 1 || n_heads < 1 || n_kv_heads < 1) {
    throw ConfigError("attention: d_model, n_heads and n_kv_heads must all be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (n_heads % n_kv_heads != 0) {
    throw ConfigError("attention: n_heads " + std::to_string(n_heads) +
                      " is not a multiple of n_kv_heads " + std::to_string(n_kv_heads));
  }
  if (head_dim() % 2 != 0) {
    throw ConfigError("attention: head dimension " + std::to_string(head_dim()) +
                      " must be even for rotary embeddings");
  }
}

BlockWeights init_block(const AttentionLayout& layout, Rng& rng, float init_std) {
  layout.validate();
  const auto d = layout.d_model, kv = layout.kv_dim(), hidden = 4 * d;
  BlockWeights w;
  w.wq = normal_tensor({d, d}, rng, init_std);
  w.wk = normal_tensor({kv, d}, rng, init_std);
  w.wv = normal_tensor({kv, d}, rng, init_std);
  w.wo = normal_tensor({d, d}, rng, init_std);
  w.w_up = normal_tensor({hidden, d}, rng, init_std);
  w.w_gate = normal_tensor({hidden, d}, rng, init_std);
  w.w_down = normal_tensor({d, hidden}, rng, init_std);
  w.gamma_attn = Tensor::ones({d}).set_requires_grad();
  w.gamma_mlp = Tensor::ones({d}).set_requires_grad();
  return w;
}

RopeTable::RopeTable(std::int64_t max_positions, std::int64_t head_dim, double theta)
    : positions_(max_positions), pairs_(head_dim / 2), theta_(theta) {
  if (head_dim % 2 != 0) throw ConfigError("rope: head dimension must be even");
  if (max_positions < 1) throw ConfigError("rope: table needs at least one position");
  std::vector<float> cos_values(static_cast<std::size_t>(positions_ * pairs_));
  std::vector<float> sin_values(cos_values.size());
  for (std::int64_t p = 0; p < positions_; ++p) {
    for (std::int64_t i = 0; i < pairs_; ++i) {
      const double freq = std::pow(theta, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
      const double angle = static_cast<double>(p) * freq;
      cos_values[p * pairs_ + i] = static_cast<float>(std::cos(angle));
      sin_values[p * pairs_ + i] = static_cast<float>(std::sin(angle));
    }
  }
  cos_ = std::make_shared<const std::vector<float>>(std::move(cos_values));
  sin_ = std::make_shared<const std::vector<float>>(std::move(sin_values));
}

Tensor apply_rope(const Tensor& x, const RopeTable& table, std::int64_t position_offset) {
  if (x.rank() != 4) throw ShapeError("apply_rope expects [B, H, T, d_h], got " + shape_string(x.shape()));
  const auto dh = x.dim(3), T = x.dim(2), rows = x.dim(0) * x.dim(1);
  if (dh % 2 != 0) throw ConfigError("apply_rope: odd head dimension " + std::to_string(dh));
  if (dh / 2 != table.pairs()) throw ShapeError("apply_rope: table built for a different head dimension");
  if (position_offset < 0 || position_offset + T > table.positions()) {
    throw InputError("apply_rope: positions exceed rotary table coverage");
  }
  Tensor out(x.shape());
  const float* src = x.data();
  float* dst = out.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t t = 0; t < T; ++t) {
      const std::int64_t pos = position_offset + t;
      const float* a = src + (r * T + t) * dh;
      float* o = dst + (r * T + t) * dh;
      for (std::int64_t i = 0; i < dh / 2; ++i) {
        const float c = table.cos(pos, i), s = table.sin(pos, i);
        o[2 * i] = a[2 * i] * c - a[2 * i + 1] * s;
        o[2 * i + 1] = a[2 * i] * s + a[2 * i + 1] * c;
      }
    }
  }
  return record_op(out, "rope", {x}, [x, table, position_offset, rows, T, dh](const TensorImpl& o) {
    float* g = x.grad_buffer().data();
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t t = 0; t < T; ++t) {
        const std::int64_t pos = position_offset + t;
        const float* go = o.grad.data() + (r * T + t) * dh;
        float* gi = g + (r * T + t) * dh;
        for (std::int64_t i = 0; i < dh / 2; ++i) {
          const float c = table.cos(pos, i), s = table.sin(pos, i);
          gi[2 * i] += go[2 * i] * c + go[2 * i + 1] * s;
          gi[2 * i + 1] += -go[2 * i] * s + go[2 * i + 1] * c;
        }
      }
    }
  });
}

Tensor grouped_attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
  if (q.rank() != 4 || k.rank() != 4 || v.rank() != 4 || k.shape() != v.shape() || q.dim(0) != k.dim(0) ||
      q.dim(2) != k.dim(2) || q.dim(3) != k.dim(3)) {
    throw ShapeError("grouped_attention: incompatible q " + shape_string(q.shape()) + ", k " +
                     shape_string(k.shape()) + ", v " + shape_string(v.shape()));
  }
  const auto B = q.dim(0), Hq = q.dim(1), T = q.dim(2), dh = q.dim(3), Hkv = k.dim(1);
  if (Hq % Hkv != 0) throw ConfigError("grouped_attention: query heads not a multiple of KV heads");
  const auto group = Hq / Hkv;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  Tensor out(q.shape());
  FloatBuffer probs(static_cast<std::size_t>(B * Hq * T * T));
  RowMatrix scores(T, T);
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t h = 0; h < Hq; ++h) {
      const std::int64_t kvh = h / group;
      ConstMatrixMap qm(q.data() + (b * Hq + h) * T * dh, T, dh);
      ConstMatrixMap km(k.data() + (b * Hkv + kvh) * T * dh, T, dh);
      ConstMatrixMap vm(v.data() + (b * Hkv + kvh) * T * dh, T, dh);
      MatrixMap pm(probs.data() + (b * Hq + h) * T * T, T, T);
      scores.noalias() = (qm * km.transpose()) * scale;
      for (std::int64_t i = 0; i < T; ++i) {
        const std::int64_t visible = causal ? i + 1 : T;
        auto row = scores.row(i).head(visible);
        const float mx = row.maxCoeff();
        pm.row(i).head(visible) = (row.array() - mx).exp();
        pm.row(i).head(visible) /= pm.row(i).head(visible).sum();
        if (visible < T) pm.row(i).tail(T - visible).setZero();
      }
      MatrixMap(out.data() + (b * Hq + h) * T * dh, T, dh).noalias() = pm * vm;
    }
  }
  return record_op(
      out, "grouped_attention", {q, k, v},
      [q, k, v, probs = std::move(probs), B, Hq, Hkv, T, dh, group, scale](const TensorImpl& o) {
        RowMatrix dp(T, T), ds(T, T);
        for (std::int64_t b = 0; b < B; ++b) {
          for (std::int64_t h = 0; h < Hq; ++h) {
            const std::int64_t kvh = h / group;
            const auto q_off = (b * Hq + h) * T * dh, kv_off = (b * Hkv + kvh) * T * dh;
            ConstMatrixMap qm(q.data() + q_off, T, dh);
            ConstMatrixMap km(k.data() + kv_off, T, dh);
            ConstMatrixMap vm(v.data() + kv_off, T, dh);
            ConstMatrixMap pm(probs.data() + (b * Hq + h) * T * T, T, T);
            ConstMatrixMap go(o.grad.data() + q_off, T, dh);
            if (v.requires_grad()) MatrixMap(v.grad_buffer().data() + kv_off, T, dh).noalias() += pm.transpose() * go;
            dp.noalias() = go * vm.transpose();
            Eigen::VectorXf row_dot = dp.cwiseProduct(pm).rowwise().sum();
            ds = pm.cwiseProduct(dp.colwise() - row_dot);
            if (q.requires_grad()) MatrixMap(q.grad_buffer().data() + q_off, T, dh).noalias() += (ds * km) * scale;
            if (k.requires_grad()) {
              MatrixMap(k.grad_buffer().data() + kv_off, T, dh).noalias() += (ds.transpose() * qm) * scale;
            }
          }
        }
      });
}

Tensor gqa_attention(const Tensor& x, const BlockWeights& w, const RopeTable& rope,
                     const AttentionLayout& layout, bool causal) {
  if (x.rank() != 3 || x.dim(2) != layout.d_model) {
    throw ConfigError("gqa_attention: input " + shape_string(x.shape()) + " does not match d_model " +
                      std::to_string(layout.d_model));
  }
  const auto B = x.dim(0), T = x.dim(1), dh = layout.head_dim();
  auto heads = [&](const Tensor& flat, std::int64_t n) { return transpose_12(reshape(flat, {B, T, n, dh})); };
  Tensor q = apply_rope(heads(linear(x, w.wq), layout.n_heads), rope);
  Tensor k = apply_rope(heads(linear(x, w.wk), layout.n_kv_heads), rope);
  Tensor v = heads(linear(x, w.wv), layout.n_kv_heads);
  Tensor attn = grouped_attention(q, k, v, causal);
  Tensor merged = reshape(transpose_12(attn), {B, T, layout.d_model});
  return linear(merged, w.wo);
}

Tensor swiglu_mlp(const Tensor& x, const BlockWeights& w, const BlockContext& ctx) {
  Tensor hidden = mul(silu(linear(x, w.w_up)), linear(x, w.w_gate));
  Tensor out = linear(hidden, w.w_down);
  if (ctx.training && ctx.dropout > 0.0f) {
    if (!ctx.rng) throw UsageError("swiglu_mlp: training-mode dropout needs a random source");
    out = dropout(out, ctx.dropout, *ctx.rng);
  }
  return out;
}

Tensor block_forward(const Tensor& h, const BlockWeights& w, const RopeTable& rope, const BlockContext& ctx) {
  Tensor h1 = add(h, gqa_attention(rms_norm(h, w.gamma_attn, ctx.rms_eps), w, rope, ctx.layout, true));
  return add(h1, swiglu_mlp(rms_norm(h1, w.gamma_mlp, ctx.rms_eps), w, ctx));
}

Tensor stack_forward(const Tensor& h, const std::vector<BlockWeights>& blocks, const RopeTable& rope,
                     const BlockContext& ctx) {
  Tensor x = h;
  for (const auto& b : blocks) x = block_forward(x, b, rope, ctx);
  return x;
}

}  // namespace cfhrm
