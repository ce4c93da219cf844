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

#include "cfhrm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "cfhrm/errors.hpp"

namespace cfhrm {

namespace {

std::atomic<std::uint64_t> next_tensor_id{1};
thread_local bool recording_enabled = true;

std::shared_ptr<TensorImpl> make_impl(Shape shape, FloatBuffer values) {
  for (auto d : shape) {
    if (d < 1) throw ShapeError("tensor dimensions must be >= 1, got " + shape_string(shape));
  }
  if (shape.empty()) throw ShapeError("tensor rank must be >= 1");
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->id = next_tensor_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}

}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) {
  auto n = shape_numel(shape);
  impl_ = make_impl(std::move(shape), FloatBuffer(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)), fill));
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : impl_(make_impl(std::move(shape), FloatBuffer(values.begin(), values.end()))) {}

const Shape& Tensor::shape() const { return impl_->shape; }

std::int64_t Tensor::dim(std::int64_t axis) const {
  auto r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeError("axis out of range for shape " + shape_string(shape()));
  return impl_->shape[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(impl_->values.size()); }

std::span<float> Tensor::values() { return impl_->values; }
std::span<const float> Tensor::values() const { return impl_->values; }

float Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape()));
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const { return impl_->grad; }

std::span<float> Tensor::grad_buffer() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0f);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

std::uint64_t Tensor::node_id() const { return impl_->id; }
bool Tensor::is_leaf() const { return impl_->node == nullptr; }
const GradNode* Tensor::grad_node() const { return impl_->node.get(); }

Tensor Tensor::detach() const { return Tensor(make_impl(impl_->shape, impl_->values)); }

Tensor Tensor::clone() const { return detach(); }

bool grad_enabled() { return recording_enabled; }

NoGradGuard::NoGradGuard() : previous_(recording_enabled) { recording_enabled = false; }
NoGradGuard::~NoGradGuard() { recording_enabled = previous_; }

Tensor record_op(Tensor result, std::string_view rule, std::initializer_list<Tensor> inputs,
                 std::function<void(const TensorImpl& out)> backward_rule) {
  if (!recording_enabled) return result;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return result;
  auto node = std::make_shared<GradNode>();
  node->id = result.impl_->id;
  node->rule = rule;
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.impl_);
  node->backward = std::move(backward_rule);
  result.impl_->node = std::move(node);
  result.impl_->requires_grad = true;
  return result;
}

namespace {

// Non-leaf tensors reachable from root, sorted by creation order.
std::vector<TensorImpl*> reachable_ops(TensorImpl* root) {
  std::vector<TensorImpl*> ops;
  std::vector<TensorImpl*> stack{root};
  std::unordered_set<TensorImpl*> seen{root};
  while (!stack.empty()) {
    auto* t = stack.back();
    stack.pop_back();
    if (!t->node) continue;
    ops.push_back(t);
    for (const auto& in : t->node->inputs) {
      if (seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::sort(ops.begin(), ops.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return ops;
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() requires a single-element loss, got shape " +
                     (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }
  auto* root = loss.impl().get();
  if (!root->requires_grad) throw UsageError("backward() on a tensor that does not require grad");

  auto ops = reachable_ops(root);
  for (auto* t : ops) t->grad.assign(t->values.size(), 0.0f);
  if (root->grad.empty()) root->grad.assign(1, 0.0f);
  root->grad[0] += 1.0f;

  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    auto* t = *it;
    t->node->backward(*t);
    if (t != root) {
      t->grad.clear();
      t->grad.shrink_to_fit();
    }
  }
}

std::vector<const GradNode*> computation_record(const Tensor& root) {
  std::vector<const GradNode*> out;
  for (auto* t : reachable_ops(root.impl().get())) out.push_back(t->node.get());
  return out;
}

}  // namespace cfhrm
