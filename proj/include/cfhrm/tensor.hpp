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
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace cfhrm {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Storage aligned to Eigen's packet size. Vectorized reductions peel a
// different prefix for every start address, so unaligned buffers make sums
// depend on where the allocator happened to place them.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

struct TensorImpl;

// One recorded operation of the computation record. The backward rule reads
// the output gradient from `out` and accumulates into the inputs it captured.
struct GradNode {
  std::uint64_t id = 0;
  std::string_view rule;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  FloatBuffer values;
  FloatBuffer grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::shared_ptr<GradNode> node;  // null for leaves
};

// Dense float32 n-d array with an optional gradient accumulator.
//
// Tensor is a shared handle: copies alias the same storage, like parameters
// in most deep learning frameworks. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0f); }
  static Tensor scalar(float v) { return Tensor(Shape{1}, v); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t rank() const { return static_cast<std::int64_t>(shape().size()); }
  // Negative indices count from the back.
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t numel() const;

  std::span<float> values();
  std::span<const float> values() const;
  float* data() { return impl_->values.data(); }
  const float* data() const { return impl_->values.data(); }
  float item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const;
  // Empty span when no gradient has been accumulated yet.
  std::span<const float> grad() const;
  // Gradient storage, allocated (zero-filled) on first use.
  std::span<float> grad_buffer() const;
  void zero_grad();

  std::uint64_t node_id() const;
  bool is_leaf() const;
  const GradNode* grad_node() const;

  Tensor detach() const;
  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor record_op(Tensor, std::string_view, std::initializer_list<Tensor>,
                          std::function<void(const TensorImpl&)>);
  std::shared_ptr<TensorImpl> impl_;
};

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Attaches `result` to the computation record when recording is enabled and
// any input requires a gradient; otherwise returns it untouched.
Tensor record_op(Tensor result, std::string_view rule, std::initializer_list<Tensor> inputs,
                 std::function<void(const TensorImpl& out)> backward);

// Reverse-mode pass from a single-element tensor. Gradients are added into
// every participating leaf that requires them; intermediate gradients are
// recomputed from scratch on each pass.
void backward(const Tensor& loss);

// The recorded operations reachable from `root`, in execution order.
std::vector<const GradNode*> computation_record(const Tensor& root);

}  // namespace cfhrm
