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
#include "cfhrm/ops.hpp"
#include "cfhrm/rng.hpp"
#include "oracles.hpp"

namespace cfhrm {
namespace {

Tensor randn(Shape shape, std::uint64_t seed, float std = 1.0f) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal(0.0f, std);
  return t;
}

TEST(Matmul, IdentityLeavesMatrix) {
  Tensor eye({3, 3}, std::vector<float>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor m = randn({3, 4}, 1);
  Tensor out = matmul(eye, m);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(out.values()[i], m.values()[i]);
}

TEST(Matmul, HandExample) {
  Tensor a({2, 2}, std::vector<float>{1, 2, 3, 4});
  Tensor b({2, 1}, std::vector<float>{1, 1});
  Tensor c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c.values()[0], 3.0f);
  EXPECT_EQ(c.values()[1], 7.0f);
}

TEST(Matmul, FiniteDifferenceAgreement) {
  Tensor a = randn({4, 5}, 2), b = randn({5, 3}, 3);
  a.set_requires_grad();
  b.set_requires_grad();
  auto checks = oracle::check_gradients("matmul", [&] { return matmul(a, b); }, {{"a", a}, {"b", b}}, 1e-3, 100, 4);
  for (const auto& c : checks) EXPECT_LE(c.rel_error, 1e-3) << c.name;
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Tensor({2, 3}), Tensor({4, 2}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos) << msg;
  }
}

TEST(RmsNorm, OnesStayOnes) {
  Tensor x = Tensor::ones({448}), g = Tensor::ones({448});
  for (const Tensor r = rms_norm(x, g, 1e-6f); float v : r.values()) EXPECT_NEAR(v, 1.0f, 1e-5);
}

TEST(RmsNorm, HandExample) {
  Tensor y = rms_norm(Tensor({2}, std::vector<float>{3, 4}), Tensor::ones({2}), 0.0f);
  EXPECT_NEAR(y.values()[0], 0.84853f, 1e-5);
  EXPECT_NEAR(y.values()[1], 1.13137f, 1e-5);
}

TEST(RmsNorm, ScaleInvariantAtZeroEps) {
  Tensor x = randn({3, 16}, 5), g = randn({16}, 6);
  Tensor a = rms_norm(x, g, 0.0f), b = rms_norm(scale(x, 7.3f), g, 0.0f);
  for (std::size_t i = 0; i < a.values().size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-5);
}

TEST(RmsNorm, MatchesOracle) {
  Tensor x = randn({4, 10}, 7), g = randn({10}, 8);
  auto want = oracle::rms_norm(oracle::to_double(x.values()), 10, oracle::to_double(g.values()), 1e-6);
  Tensor got = rms_norm(x, g, 1e-6f);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.values()[i], want[i], 1e-5);
}

TEST(RmsNorm, NonFiniteInputIsNumericError) {
  Tensor x({2}, std::vector<float>{1.0f, NAN});
  EXPECT_THROW(rms_norm(x, Tensor::ones({2}), 1e-6f), NumericError);
}

TEST(Softmax, ConstantIsUniform) {
  for (const Tensor r = softmax_last_axis(Tensor({5}, 3.3f)); float v : r.values()) EXPECT_NEAR(v, 0.2f, 1e-7);
}

TEST(Softmax, AnalyticCase) {
  Tensor y = softmax_last_axis(Tensor({2}, std::vector<float>{0.0f, std::log(2.0f)}));
  EXPECT_NEAR(y.values()[0], 1.0 / 3.0, 1e-7);
  EXPECT_NEAR(y.values()[1], 2.0 / 3.0, 1e-7);
}

TEST(Softmax, MatchesDirectExpOracle) {
  Tensor x = randn({9}, 9);
  double z = 0.0;
  for (float v : x.values()) z += std::exp(static_cast<double>(v));
  Tensor y = softmax_last_axis(x);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(y.values()[i], std::exp(static_cast<double>(x.values()[i])) / z, 1e-6);
}

TEST(Softmax, RowsSumToOne) {
  Tensor x = randn({20, 33}, 10, 25.0f);
  for (auto& v : x.values()) v = std::clamp(v, -50.0f, 50.0f);
  Tensor y = softmax_last_axis(x);
  for (int r = 0; r < 20; ++r) {
    double s = 0.0;
    for (int c = 0; c < 33; ++c) s += y.values()[r * 33 + c];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Silu, Values) {
  Tensor y = silu(Tensor({3}, std::vector<float>{0.0f, 1.0f, 30.0f}));
  EXPECT_EQ(y.values()[0], 0.0f);
  const double sigmoid_one = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(y.values()[1], sigmoid_one, 1e-6);
  EXPECT_NEAR(y.values()[1], 0.731059, 1e-6);
  EXPECT_NEAR(y.values()[2], 30.0, 1e-6);
}

TEST(CrossEntropy, UniformLogits) {
  const std::int64_t V = 50304;
  Tensor logits({1, 1, V}, 0.0f);
  std::vector<std::int32_t> targets{17};
  EXPECT_NEAR(cross_entropy_next_token(logits, targets).item(), std::log(50304.0), 1e-4);
}

TEST(CrossEntropy, NearOneHot) {
  Tensor logits({1, 1, 10}, 0.0f);
  logits.values()[4] = 20.0f;
  std::vector<std::int32_t> targets{4};
  EXPECT_LT(cross_entropy_next_token(logits, targets).item(), 1e-6);
}

TEST(CrossEntropy, MatchesSoftmaxLogOracle) {
  Tensor logits = randn({2, 3, 7}, 11);
  std::vector<std::int32_t> targets{0, 6, 3, 2, 2, 5};
  double want = 0.0;
  for (int r = 0; r < 6; ++r) {
    oracle::Vec row(logits.values().begin() + r * 7, logits.values().begin() + (r + 1) * 7);
    want -= std::log(oracle::softmax(row)[static_cast<std::size_t>(targets[r])]);
  }
  EXPECT_NEAR(cross_entropy_next_token(logits, targets).item(), want / 6.0, 1e-6);
}

TEST(CrossEntropy, IgnoredRowsAndBadTargets) {
  Tensor logits = randn({1, 3, 5}, 12);
  std::vector<std::int32_t> some{1, kIgnoreIndex, 4};
  std::vector<std::int32_t> kept{1, 4};
  Tensor two({1, 2, 5});
  for (int c = 0; c < 5; ++c) {
    two.values()[c] = logits.values()[c];
    two.values()[5 + c] = logits.values()[10 + c];
  }
  EXPECT_NEAR(cross_entropy_next_token(logits, some).item(), cross_entropy_next_token(two, kept).item(), 1e-6);
  std::vector<std::int32_t> bad{1, 5, 0};
  EXPECT_THROW(cross_entropy_next_token(logits, bad), IndexError);
}

TEST(MeanPool, SingleStep) {
  Tensor x = randn({2, 1, 4}, 13);
  Tensor y = mean_pool_time(x);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(y.values()[i], x.values()[i]);
}

TEST(MeanPool, HandExample) {
  Tensor x({1, 2, 3}, std::vector<float>{1, 1, 1, 3, 3, 3});
  for (const Tensor r = mean_pool_time(x); float v : r.values()) EXPECT_EQ(v, 2.0f);
}

TEST(MeanPool, MatchesLoopOracle) {
  Tensor x = randn({2, 5, 4}, 14);
  Tensor y = mean_pool_time(x);
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < 4; ++i) {
      double s = 0.0;
      for (int t = 0; t < 5; ++t) s += x.values()[(b * 5 + t) * 4 + i];
      EXPECT_NEAR(y.values()[b * 4 + i], s / 5.0, 1e-6);
    }
  }
}

TEST(Dropout, InvertedScalingAndIdentityAtZero) {
  Tensor x({1000}, 1.0f);
  Rng rng(15);
  Tensor y = dropout(x, 0.25f, rng);
  int kept = 0;
  for (float v : y.values()) {
    if (v != 0.0f) {
      EXPECT_NEAR(v, 1.0f / 0.75f, 1e-6);
      ++kept;
    }
  }
  EXPECT_NEAR(kept / 1000.0, 0.75, 0.05);
  Tensor z = dropout(x, 0.0f, rng);
  for (float v : z.values()) EXPECT_EQ(v, 1.0f);
}

TEST(WhereSamples, PicksPerSample) {
  Tensor a({2, 2}, 1.0f), b({2, 2}, 2.0f);
  Tensor y = where_samples({false, true}, a, b);
  EXPECT_EQ(y.values()[0], 2.0f);
  EXPECT_EQ(y.values()[3], 1.0f);
}

TEST(Embedding, GathersRowsAndRejectsBadIds) {
  Tensor table = randn({5, 3}, 16);
  std::vector<std::int32_t> ids{4, 0};
  Tensor y = embedding(table, ids, {1, 2});
  EXPECT_EQ(y.shape(), (Shape{1, 2, 3}));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(y.values()[i], table.values()[12 + i]);
  std::vector<std::int32_t> bad{5};
  EXPECT_THROW(embedding(table, bad, {1, 1}), IndexError);
}

}  // namespace
}  // namespace cfhrm
