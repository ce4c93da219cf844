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

#include "cfhrm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfhrm/errors.hpp"

namespace cfhrm {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_finite(std::span<const float> v, const char* op) {
  for (float x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

inline float sigmoid_scalar(float x) { return 1.0f / (1.0f + std::exp(-x)); }

Eigen::Map<const Eigen::ArrayXf> as_array(std::span<const float> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}
Eigen::Map<Eigen::ArrayXf> as_array(std::span<float> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  as_array(out.values()) = as_array(a.values()) + as_array(b.values());
  return record_op(out, "add", {a, b}, [a, b](const TensorImpl& o) mutable {
    auto g = as_array(std::span<const float>(o.grad));
    if (a.requires_grad()) as_array(a.grad_buffer()) += g;
    if (b.requires_grad()) as_array(b.grad_buffer()) += g;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  as_array(out.values()) = as_array(a.values()) - as_array(b.values());
  return record_op(out, "sub", {a, b}, [a, b](const TensorImpl& o) mutable {
    auto g = as_array(std::span<const float>(o.grad));
    if (a.requires_grad()) as_array(a.grad_buffer()) += g;
    if (b.requires_grad()) as_array(b.grad_buffer()) -= g;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  as_array(out.values()) = as_array(a.values()) * as_array(b.values());
  return record_op(out, "mul", {a, b}, [a, b](const TensorImpl& o) mutable {
    auto g = as_array(std::span<const float>(o.grad));
    if (a.requires_grad()) as_array(a.grad_buffer()) += g * as_array(b.values());
    if (b.requires_grad()) as_array(b.grad_buffer()) += g * as_array(a.values());
  });
}

Tensor scale(const Tensor& x, float s) {
  Tensor out(x.shape());
  as_array(out.values()) = as_array(x.values()) * s;
  return record_op(out, "scale", {x}, [x, s](const TensorImpl& o) mutable {
    as_array(x.grad_buffer()) += as_array(std::span<const float>(o.grad)) * s;
  });
}

Tensor silu(const Tensor& x) {
  Tensor out(x.shape());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] * sigmoid_scalar(xv[i]);
  return record_op(out, "silu", {x}, [x](const TensorImpl& o) mutable {
    auto xv = x.values();
    auto gx = x.grad_buffer();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      float s = sigmoid_scalar(xv[i]);
      gx[i] += o.grad[i] * s * (1.0f + xv[i] * (1.0f - s));
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = sigmoid_scalar(xv[i]);
  auto y = out.values();
  FloatBuffer saved(y.begin(), y.end());
  return record_op(out, "sigmoid", {x}, [x, saved = std::move(saved)](const TensorImpl& o) mutable {
    auto gx = x.grad_buffer();
    for (std::size_t i = 0; i < saved.size(); ++i) gx[i] += o.grad[i] * saved[i] * (1.0f - saved[i]);
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.values()) acc += v;
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  return record_op(out, "sum", {x}, [x](const TensorImpl& o) mutable {
    as_array(x.grad_buffer()) += o.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0f / static_cast<float>(x.numel())); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul: operands need rank >= 2, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const auto m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  // Broadcast leading (batch) dimensions, numpy style.
  Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  const std::size_t nb = std::max(a_batch.size(), b_batch.size());
  a_batch.insert(a_batch.begin(), nb - a_batch.size(), 1);
  b_batch.insert(b_batch.begin(), nb - b_batch.size(), 1);
  Shape out_batch(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    if (a_batch[i] != b_batch[i] && a_batch[i] != 1 && b_batch[i] != 1) {
      throw ShapeError("matmul: batch dimensions not broadcastable for " + shape_string(a.shape()) +
                       " x " + shape_string(b.shape()));
    }
    out_batch[i] = std::max(a_batch[i], b_batch[i]);
  }
  const std::int64_t batches = shape_numel(out_batch);
  // Flat matrix index of each broadcast batch element for a and b.
  std::vector<std::int64_t> a_index(batches), b_index(batches);
  for (std::int64_t flat = 0; flat < batches; ++flat) {
    std::int64_t rem = flat, ai = 0, bi = 0, a_stride = 1, b_stride = 1;
    for (std::size_t i = nb; i-- > 0;) {
      std::int64_t coord = rem % out_batch[i];
      rem /= out_batch[i];
      if (a_batch[i] != 1) ai += coord * a_stride;
      if (b_batch[i] != 1) bi += coord * b_stride;
      a_stride *= a_batch[i];
      b_stride *= b_batch[i];
    }
    a_index[flat] = ai;
    b_index[flat] = bi;
  }

  Shape out_shape = out_batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape);
  for (std::int64_t i = 0; i < batches; ++i) {
    ConstMatrixMap am(a.data() + a_index[i] * m * k, m, k);
    ConstMatrixMap bm(b.data() + b_index[i] * k * n, k, n);
    MatrixMap(out.data() + i * m * n, m, n).noalias() = am * bm;
  }
  return record_op(out, "matmul", {a, b},
                   [a, b, a_index, b_index, m, k, n](const TensorImpl& o) mutable {
                     for (std::size_t i = 0; i < a_index.size(); ++i) {
                       ConstMatrixMap g(o.grad.data() + i * m * n, m, n);
                       if (a.requires_grad()) {
                         MatrixMap(a.grad_buffer().data() + a_index[i] * m * k, m, k).noalias() +=
                             g * ConstMatrixMap(b.data() + b_index[i] * k * n, k, n).transpose();
                       }
                       if (b.requires_grad()) {
                         MatrixMap(b.grad_buffer().data() + b_index[i] * k * n, k, n).noalias() +=
                             ConstMatrixMap(a.data() + a_index[i] * m * k, m, k).transpose() * g;
                       }
                     }
                   });
}

Tensor linear(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2 || x.dim(-1) != w.dim(1)) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                     shape_string(w.shape()));
  }
  const auto in = w.dim(1), out_dim = w.dim(0), rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  Tensor out(out_shape);
  ConstMatrixMap xm(x.data(), rows, in);
  ConstMatrixMap wm(w.data(), out_dim, in);
  MatrixMap(out.data(), rows, out_dim).noalias() = xm * wm.transpose();
  return record_op(out, "linear", {x, w}, [x, w, rows, in, out_dim](const TensorImpl& o) mutable {
    ConstMatrixMap g(o.grad.data(), rows, out_dim);
    if (x.requires_grad()) {
      MatrixMap(x.grad_buffer().data(), rows, in).noalias() += g * ConstMatrixMap(w.data(), out_dim, in);
    }
    if (w.requires_grad()) {
      MatrixMap(w.grad_buffer().data(), out_dim, in).noalias() +=
          g.transpose() * ConstMatrixMap(x.data(), rows, in);
    }
  });
}

Tensor rms_norm(const Tensor& x, const Tensor& gamma, float eps) {
  const auto d = x.dim(-1);
  if (gamma.rank() != 1 || gamma.dim(0) != d) {
    throw ShapeError("rms_norm: gamma " + shape_string(gamma.shape()) + " does not match input " +
                     shape_string(x.shape()));
  }
  if (eps < 0.0f) throw ConfigError("rms_norm: eps must be non-negative");
  require_finite(x.values(), "rms_norm");
  const auto rows = x.numel() / d;
  Tensor out(x.shape());
  FloatBuffer inv_rms(static_cast<std::size_t>(rows));
  ConstMatrixMap xm(x.data(), rows, d);
  MatrixMap om(out.data(), rows, d);
  auto g = Eigen::Map<const Eigen::RowVectorXf>(gamma.data(), d);
  for (std::int64_t r = 0; r < rows; ++r) {
    float ms = xm.row(r).squaredNorm() / static_cast<float>(d);
    float denom = std::sqrt(ms + eps);
    if (!(denom > 0.0f)) throw NumericError("rms_norm: zero root-mean-square with eps = 0");
    inv_rms[r] = 1.0f / denom;
    om.row(r) = (xm.row(r) * inv_rms[r]).cwiseProduct(g);
  }
  return record_op(out, "rms_norm", {x, gamma},
                   [x, gamma, inv_rms = std::move(inv_rms), rows, d](const TensorImpl& o) mutable {
                     ConstMatrixMap xm(x.data(), rows, d);
                     ConstMatrixMap gm(o.grad.data(), rows, d);
                     auto gam = Eigen::Map<const Eigen::RowVectorXf>(gamma.data(), d);
                     if (x.requires_grad()) {
                       MatrixMap gx(x.grad_buffer().data(), rows, d);
                       for (std::int64_t r = 0; r < rows; ++r) {
                         const float ir = inv_rms[r];
                         Eigen::RowVectorXf gy = gm.row(r).cwiseProduct(gam);
                         const float dot = gy.dot(xm.row(r));
                         gx.row(r) += ir * gy - (ir * ir * ir * dot / static_cast<float>(d)) * xm.row(r);
                       }
                     }
                     if (gamma.requires_grad()) {
                       auto gg = Eigen::Map<Eigen::RowVectorXf>(gamma.grad_buffer().data(), d);
                       for (std::int64_t r = 0; r < rows; ++r) {
                         gg += gm.row(r).cwiseProduct(xm.row(r)) * inv_rms[r];
                       }
                     }
                   });
}

Tensor softmax_last_axis(const Tensor& x) {
  require_finite(x.values(), "softmax");
  const auto n = x.dim(-1), rows = x.numel() / n;
  Tensor out(x.shape());
  ConstMatrixMap xm(x.data(), rows, n);
  MatrixMap om(out.data(), rows, n);
  for (std::int64_t r = 0; r < rows; ++r) {
    om.row(r) = (xm.row(r).array() - xm.row(r).maxCoeff()).exp();
    om.row(r) /= om.row(r).sum();
  }
  FloatBuffer y(out.values().begin(), out.values().end());
  return record_op(out, "softmax", {x}, [x, y = std::move(y), rows, n](const TensorImpl& o) mutable {
    ConstMatrixMap ym(y.data(), rows, n);
    ConstMatrixMap gm(o.grad.data(), rows, n);
    MatrixMap gx(x.grad_buffer().data(), rows, n);
    for (std::int64_t r = 0; r < rows; ++r) {
      const float dot = gm.row(r).dot(ym.row(r));
      gx.row(r).array() += ym.row(r).array() * (gm.row(r).array() - dot);
    }
  });
}

Tensor cross_entropy_next_token(const Tensor& logits, std::span<const std::int32_t> targets) {
  const auto vocab = logits.dim(-1), rows = logits.numel() / vocab;
  if (static_cast<std::int64_t>(targets.size()) != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_string(logits.shape()));
  }
  std::int64_t count = 0;
  for (auto t : targets) {
    if (t == kIgnoreIndex) continue;
    if (t < 0 || t >= vocab) {
      throw IndexError("cross_entropy: target id " + std::to_string(t) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
    ++count;
  }
  require_finite(logits.values(), "cross_entropy");
  ConstMatrixMap lm(logits.data(), rows, vocab);
  // Per-row log-sum-exp, reused by backward.
  FloatBuffer row_max(rows), row_lse(rows);
  double total = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (targets[r] == kIgnoreIndex) continue;
    const float mx = lm.row(r).maxCoeff();
    const double se = (lm.row(r).array() - mx).exp().template cast<double>().sum();
    row_max[r] = mx;
    row_lse[r] = static_cast<float>(mx + std::log(se));
    total += static_cast<double>(row_lse[r]) - lm(r, targets[r]);
  }
  Tensor out = Tensor::scalar(count ? static_cast<float>(total / count) : 0.0f);
  std::vector<std::int32_t> tg(targets.begin(), targets.end());
  return record_op(out, "cross_entropy", {logits},
                   [logits, tg = std::move(tg), row_lse = std::move(row_lse), rows, vocab,
                    count](const TensorImpl& o) mutable {
                     if (count == 0) return;
                     const float g = o.grad[0] / static_cast<float>(count);
                     ConstMatrixMap lm(logits.data(), rows, vocab);
                     MatrixMap gl(logits.grad_buffer().data(), rows, vocab);
                     for (std::int64_t r = 0; r < rows; ++r) {
                       if (tg[r] == kIgnoreIndex) continue;
                       gl.row(r).array() += g * (lm.row(r).array() - row_lse[r]).exp();
                       gl(r, tg[r]) -= g;
                     }
                   });
}

Tensor mean_pool_time(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("mean_pool_time expects [B, T, d], got " + shape_string(x.shape()));
  const auto B = x.dim(0), T = x.dim(1), d = x.dim(2);
  Tensor out({B, d});
  for (std::int64_t b = 0; b < B; ++b) {
    ConstMatrixMap xm(x.data() + b * T * d, T, d);
    Eigen::Map<Eigen::RowVectorXf>(out.data() + b * d, d) = xm.colwise().sum() / static_cast<float>(T);
  }
  return record_op(out, "mean_pool_time", {x}, [x, B, T, d](const TensorImpl& o) mutable {
    auto gx = x.grad_buffer();
    for (std::int64_t b = 0; b < B; ++b) {
      Eigen::Map<const Eigen::RowVectorXf> g(o.grad.data() + b * d, d);
      MatrixMap(gx.data() + b * T * d, T, d).rowwise() += g / static_cast<float>(T);
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids, const Shape& index_shape) {
  if (table.rank() != 2) throw ShapeError("embedding table must be [V, d]");
  if (static_cast<std::int64_t>(ids.size()) != shape_numel(index_shape)) {
    throw ShapeError("embedding: id count does not match index shape " + shape_string(index_shape));
  }
  const auto V = table.dim(0), d = table.dim(1);
  Shape out_shape = index_shape;
  out_shape.push_back(d);
  Tensor out(out_shape);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= V) {
      throw IndexError("embedding: token id " + std::to_string(ids[i]) + " outside [0, " +
                       std::to_string(V) + ")");
    }
    std::copy_n(table.data() + ids[i] * d, d, out.data() + i * d);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return record_op(out, "embedding", {table}, [table, saved = std::move(saved), d](const TensorImpl& o) mutable {
    auto g = table.grad_buffer();
    for (std::size_t i = 0; i < saved.size(); ++i) {
      float* dst = g.data() + saved[i] * d;
      const float* src = o.grad.data() + i * d;
      for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  Tensor out(std::move(shape), std::vector<float>(x.values().begin(), x.values().end()));
  return record_op(out, "reshape", {x}, [x](const TensorImpl& o) mutable {
    as_array(x.grad_buffer()) += as_array(std::span<const float>(o.grad));
  });
}

Tensor transpose_12(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("transpose_12 expects rank 4, got " + shape_string(x.shape()));
  const auto A = x.dim(0), B = x.dim(1), C = x.dim(2), D = x.dim(3);
  Tensor out({A, C, B, D});
  auto permute = [A, B, C, D](const float* src, float* dst, bool accumulate) {
    for (std::int64_t a = 0; a < A; ++a)
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c) {
          const float* s = src + ((a * B + b) * C + c) * D;
          float* t = dst + ((a * C + c) * B + b) * D;
          if (accumulate) {
            for (std::int64_t i = 0; i < D; ++i) t[i] += s[i];
          } else {
            std::copy_n(s, D, t);
          }
        }
  };
  permute(x.data(), out.data(), false);
  return record_op(out, "transpose_12", {x}, [x, A, B, C, D](const TensorImpl& o) mutable {
    // Inverse permutation: out is [A, C, B, D].
    auto gx = x.grad_buffer();
    for (std::int64_t a = 0; a < A; ++a)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t b = 0; b < B; ++b) {
          const float* s = o.grad.data() + ((a * C + c) * B + b) * D;
          float* t = gx.data() + ((a * B + b) * C + c) * D;
          for (std::int64_t i = 0; i < D; ++i) t[i] += s[i];
        }
  });
}

Tensor dropout(const Tensor& x, float p, Rng& rng) {
  if (p <= 0.0f) return x;
  if (p >= 1.0f) throw ConfigError("dropout probability must be < 1");
  const float keep_scale = 1.0f / (1.0f - p);
  FloatBuffer mask(static_cast<std::size_t>(x.numel()));
  for (auto& m : mask) m = rng.bernoulli(p) ? 0.0f : keep_scale;
  Tensor out(x.shape());
  as_array(out.values()) = as_array(x.values()) * as_array(std::span<const float>(mask));
  return record_op(out, "dropout", {x}, [x, mask = std::move(mask)](const TensorImpl& o) mutable {
    as_array(x.grad_buffer()) +=
        as_array(std::span<const float>(o.grad)) * as_array(std::span<const float>(mask));
  });
}

Tensor where_samples(const std::vector<bool>& take_first, const Tensor& first, const Tensor& second) {
  require_same_shape(first, second, "where_samples");
  const auto B = first.dim(0);
  if (static_cast<std::int64_t>(take_first.size()) != B) {
    throw ShapeError("where_samples: mask length does not match batch size");
  }
  const auto row = first.numel() / B;
  Tensor out(first.shape());
  for (std::int64_t b = 0; b < B; ++b) {
    const Tensor& src = take_first[b] ? first : second;
    std::copy_n(src.data() + b * row, row, out.data() + b * row);
  }
  return record_op(out, "where_samples", {first, second},
                   [first, second, take_first, B, row](const TensorImpl& o) mutable {
                     for (std::int64_t b = 0; b < B; ++b) {
                       const Tensor& dst = take_first[b] ? first : second;
                       if (!dst.requires_grad()) continue;
                       float* g = dst.grad_buffer().data() + b * row;
                       const float* s = o.grad.data() + b * row;
                       for (std::int64_t i = 0; i < row; ++i) g[i] += s[i];
                     }
                   });
}

Tensor column(const Tensor& x, std::int64_t c) {
  if (x.rank() != 2 || c < 0 || c >= x.dim(1)) {
    throw ShapeError("column " + std::to_string(c) + " of " + shape_string(x.shape()));
  }
  const auto N = x.dim(0), C = x.dim(1);
  Tensor out({N});
  for (std::int64_t i = 0; i < N; ++i) out.values()[i] = x.values()[i * C + c];
  return record_op(out, "column", {x}, [x, c, N, C](const TensorImpl& o) mutable {
    auto g = x.grad_buffer();
    for (std::int64_t i = 0; i < N; ++i) g[i * C + c] += o.grad[i];
  });
}

}  // namespace cfhrm
