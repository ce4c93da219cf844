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

#include <gtest/gtest.h>

#include <cmath>

#include "cfhrm/errors.hpp"
#include "cfhrm/gradcheck.hpp"
#include "cfhrm/ops.hpp"
#include "cfhrm/rng.hpp"
#include "cfhrm/tensor.hpp"

namespace cfhrm {
namespace {

TEST(Tensor, ShapeMatchesValues) {
  Tensor t({2, 3}, 1.5f);
  EXPECT_EQ(t.numel(), 6);
  EXPECT_EQ(t.values().size(), 6u);
  EXPECT_EQ(t.dim(-1), 3);
  EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), ShapeError);
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
}

TEST(Tensor, GradHasValueLength) {
  Tensor x({4}, 2.0f);
  x.set_requires_grad();
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad().size(), x.values().size());
}

TEST(Backward, SumGivesOnes) {
  Tensor x({2, 3, 4}, 0.7f);
  x.set_requires_grad();
  backward(sum(x));
  for (float g : x.grad()) EXPECT_EQ(g, 1.0f);
}

TEST(Backward, SquareGivesTwiceX) {
  Tensor x({3}, std::vector<float>{1, 2, 3});
  x.set_requires_grad();
  backward(sum(mul(x, x)));
  EXPECT_FLOAT_EQ(x.grad()[0], 2.0f);
  EXPECT_FLOAT_EQ(x.grad()[1], 4.0f);
  EXPECT_FLOAT_EQ(x.grad()[2], 6.0f);
}

TEST(Backward, SecondPassWithoutResetDoubles) {
  Rng rng(1);
  Tensor x({5});
  for (auto& v : x.values()) v = rng.normal(0.0f, 1.0f);
  x.set_requires_grad();
  auto loss = [&] { return sum(mul(silu(x), x)); };
  backward(loss());
  std::vector<float> once(x.grad().begin(), x.grad().end());
  backward(loss());
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(x.grad()[i], 2.0f * once[i]);
  x.zero_grad();
  backward(loss());
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(x.grad()[i], once[i]);
}

TEST(Backward, NonScalarIsUsageError) {
  Tensor x({3}, 1.0f);
  x.set_requires_grad();
  EXPECT_THROW(backward(scale(x, 2.0f)), UsageError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x({3}, 1.0f);
  x.set_requires_grad();
  NoGradGuard guard;
  Tensor y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_EQ(y.grad_node(), nullptr);
}

TEST(ComputationRecord, InputsRecordedFirst) {
  Tensor a({2, 2}, 1.0f), b({2, 2}, 2.0f);
  a.set_requires_grad();
  b.set_requires_grad();
  Tensor loss = sum(mul(add(a, b), silu(a)));
  const auto record = computation_record(loss);
  ASSERT_FALSE(record.empty());
  for (std::size_t i = 1; i < record.size(); ++i) EXPECT_LT(record[i - 1]->id, record[i]->id);
  for (const auto* node : record) {
    for (const auto& in : node->inputs) {
      if (in->node) EXPECT_LT(in->node->id, node->id);
    }
  }
  EXPECT_EQ(record.back()->id, loss.node_id());
}

TEST(Determinism, SameSeedSameBits) {
  auto run = [] {
    Rng rng(42);
    Tensor x({4, 4});
    for (auto& v : x.values()) v = rng.normal(0.0f, 1.0f);
    Rng drop(7);
    return dropout(softmax_last_axis(matmul(x, x)), 0.2f, drop);
  };
  Tensor a = run(), b = run();
  for (std::size_t i = 0; i < a.values().size(); ++i) EXPECT_EQ(a.values()[i], b.values()[i]);
}

TEST(FiniteDifference, SumGivesOnes) {
  Tensor x({2, 3}, std::vector<float>{0.1f, -2.0f, 3.0f, 4.5f, 0.0f, -0.3f});
  Tensor g = finite_difference(
      [](const Tensor& t) {
        double s = 0.0;
        for (float v : t.values()) s += v;
        return s;
      },
      x, 1e-3);
  for (float v : g.values()) EXPECT_NEAR(v, 1.0, 1e-4);
}

TEST(FiniteDifference, ExactForQuadratic) {
  Tensor x = Tensor::scalar(3.0f);
  Tensor g = finite_difference([](const Tensor& t) { return static_cast<double>(t.item()) * t.item(); }, x, 1e-3);
  EXPECT_NEAR(g.item(), 6.0, 1e-6);
  EXPECT_EQ(x.item(), 3.0f);
}

TEST(FiniteDifference, AgreesWithBackwardOnRmsNorm) {
  Rng rng(3);
  Tensor x({8}), gamma({8}), r({8});
  for (auto* t : {&x, &gamma, &r}) {
    for (auto& v : t->values()) v = rng.normal(0.0f, 1.0f);
  }
  x.set_requires_grad();
  backward(sum(mul(rms_norm(x, gamma, 1e-6f), r)));
  Tensor fd = finite_difference(
      [&](const Tensor& t) {
        Tensor y = rms_norm(t, gamma, 1e-6f);
        double s = 0.0;
        for (std::size_t i = 0; i < 8; ++i) s += static_cast<double>(y.values()[i]) * r.values()[i];
        return s;
      },
      x, 1e-3);
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    diff += std::pow(x.grad()[i] - fd.values()[i], 2);
    ref += std::pow(fd.values()[i], 2);
  }
  EXPECT_LE(std::sqrt(diff / ref), 1e-3);
}

TEST(FiniteDifference, RejectsNonPositiveStep) {
  EXPECT_THROW(finite_difference([](const Tensor&) { return 0.0; }, Tensor::scalar(1.0f), 0.0), UsageError);
}

}  // namespace
}  // namespace cfhrm
