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
#include "cfhrm/hrm.hpp"
#include "cfhrm/ops.hpp"
#include "checks.hpp"
#include "oracles.hpp"

namespace cfhrm {
namespace {

Tensor randn(Shape shape, Rng& rng, float std = 1.0f) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal(0.0f, std);
  return t;
}

struct Fixture {
  ModelConfig config = checks::tiny_config(16, 13, 16);
  HrmWeights w;
  RopeTable rope{8, 4};
  HrmContext ctx;

  explicit Fixture(float std = 0.2f) {
    config.init_std = std;
    Rng rng(1);
    w = init_hrm(config, rng);
    ctx.block = BlockContext{config.attention(), 1e-6f, 0.0f, false, nullptr};
    ctx.c_low = config.c_low;
    ctx.c_high = config.c_high;
  }

  void zero_all() {
    auto zero = [](Tensor& t) {
      for (auto& v : t.values()) v = 0.0f;
    };
    for (auto* blocks : {&w.low_blocks, &w.high_blocks}) {
      for (auto& b : *blocks) {
        for (auto* t : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w_up, &b.w_gate, &b.w_down}) zero(*t);
      }
    }
    zero(w.inject_low);
    zero(w.inject_high);
    zero(w.halting_head);
  }
};

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::fabs(double(a.values()[i]) - b.values()[i]));
  return m;
}

TEST(InitStates, IndependentCopies) {
  Rng rng(2);
  Tensor h = randn({3, 4, 16}, rng);
  HrmState s = init_states(h);
  EXPECT_EQ(max_diff(s.z_high, h), 0.0);
  EXPECT_EQ(max_diff(s.z_low, h), 0.0);
  EXPECT_EQ(s.step, 0);
  ASSERT_EQ(s.halted.size(), 3u);
  for (bool b : s.halted) EXPECT_FALSE(b);
  s.z_low.values()[0] += 5.0f;
  EXPECT_EQ(s.z_high.values()[0], h.values()[0]);
  EXPECT_NE(s.z_low.values()[0], h.values()[0]);
}

TEST(Cycles, ZeroWeightsLeaveStatesUnchanged) {
  Fixture f;
  f.zero_all();
  Rng rng(3);
  Tensor h = randn({2, 5, 16}, rng);
  HrmState s = init_states(h);
  s.z_high = randn({2, 5, 16}, rng);
  const Tensor low0 = s.z_low.clone(), high0 = s.z_high.clone();
  low_level_cycle(s, f.w, f.rope, f.ctx);
  EXPECT_EQ(max_diff(s.z_low, low0), 0.0);
  high_level_cycle(s, f.w, f.rope, f.ctx);
  EXPECT_EQ(max_diff(s.z_high, high0), 0.0);
}

TEST(Cycles, LowDependsOnHigh) {
  Fixture f;
  Rng rng(4);
  Tensor h = randn({1, 5, 16}, rng);
  HrmState a = init_states(h), b = init_states(h);
  b.z_high = add(b.z_high, randn({1, 5, 16}, rng, 0.5f));
  low_level_cycle(a, f.w, f.rope, f.ctx);
  low_level_cycle(b, f.w, f.rope, f.ctx);
  EXPECT_GT(max_diff(a.z_low, b.z_low), 1e-4);
}

TEST(Cycles, HighDependsOnLow) {
  Fixture f;
  Rng rng(5);
  Tensor h = randn({1, 5, 16}, rng);
  HrmState a = init_states(h), b = init_states(h);
  b.z_low = add(b.z_low, randn({1, 5, 16}, rng, 0.5f));
  high_level_cycle(a, f.w, f.rope, f.ctx);
  high_level_cycle(b, f.w, f.rope, f.ctx);
  EXPECT_GT(max_diff(a.z_high, b.z_high), 1e-4);
}

TEST(Cycles, TwoInnerCyclesPerStep) {
  Fixture f;
  Rng rng(6);
  Tensor h = randn({2, 5, 16}, rng);
  HrmForwardOptions o;
  o.s_max = 3;
  o.halt_bias_delta = -1.0;  // never halts early: the cap stops the loop
  HrmOutput out = hrm_forward(h, f.w, f.rope, f.ctx, o);
  EXPECT_EQ(out.trace.samples[0].steps_used, 3);
  EXPECT_EQ(out.low_cycles, 2 * 3);
  EXPECT_EQ(out.high_cycles, 2 * 3);
}

TEST(HaltingScores, ZeroStateGivesZero) {
  Fixture f;
  Rng rng(7);
  f.w.halting_head = randn({2, 16}, rng);
  for (const Tensor r = halting_scores(Tensor({2, 3, 16}), f.w); float v : r.values()) EXPECT_EQ(v, 0.0f);
}

TEST(HaltingScores, PoolThenProjectOracle) {
  Fixture f;
  Rng rng(8);
  f.w.halting_head = randn({2, 16}, rng);
  for (std::int64_t T : {1, 6}) {
    Tensor z = randn({3, T, 16}, rng);
    Tensor got = halting_scores(z, f.w);
    for (int b = 0; b < 3; ++b) {
      for (int o = 0; o < 2; ++o) {
        double s = 0.0;
        for (int i = 0; i < 16; ++i) {
          double pooled = 0.0;
          for (int t = 0; t < T; ++t) pooled += z.values()[(b * T + t) * 16 + i];
          s += f.w.halting_head.values()[o * 16 + i] * pooled / static_cast<double>(T);
        }
        EXPECT_NEAR(got.values()[b * 2 + o], s, 1e-6);
      }
    }
  }
}

TEST(DecideHalt, StrictTrainingRule) {
  std::vector<ExplorationPlan> none(2);
  Tensor s({2, 2}, std::vector<float>{1.0f, 0.5f, 0.5f, 0.5f});
  const auto d = decide_halt_training(s, 1, none);
  EXPECT_TRUE(d[0]);
  EXPECT_FALSE(d[1]);
}

TEST(DecideHalt, InferenceBias) {
  Tensor s({1, 2}, std::vector<float>{0.5f, 0.7f});
  EXPECT_FALSE(decide_halt_training(s, 1, std::vector<ExplorationPlan>(1))[0]);
  EXPECT_TRUE(decide_halt_inference(s, 0.35)[0]);
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor r = randn({4, 2}, rng, 10.0f);
    EXPECT_EQ(decide_halt_inference(r, 0.0), decide_halt_training(r, 1, std::vector<ExplorationPlan>(4)));
    for (bool b : decide_halt_inference(r, 1e9)) EXPECT_TRUE(b);
  }
}

TEST(DecideHalt, ExploratoryUsesThreshold) {
  std::vector<ExplorationPlan> plans{{true, 3}, {true, 2}};
  Tensor s({2, 2}, std::vector<float>{5.0f, 0.0f, -5.0f, 0.0f});
  EXPECT_EQ(decide_halt_training(s, 2, plans), (std::vector<bool>{false, true}));
  EXPECT_EQ(decide_halt_training(s, 3, plans), (std::vector<bool>{true, true}));
}

TEST(Exploration, ForcedDepthsUniform) {
  const auto plans = plan_exploration(10000, 77, 0, 1.0, 16);
  std::vector<std::int64_t> counts(15, 0);
  for (const auto& p : plans) {
    ASSERT_TRUE(p.exploratory);
    ASSERT_GE(p.forced_target, 2);
    ASSERT_LE(p.forced_target, 16);
    ++counts[static_cast<std::size_t>(p.forced_target - 2)];
  }
  EXPECT_GT(oracle::chi_square_uniform_p(counts), 0.01);
}

TEST(Exploration, FractionNearProbability) {
  const auto plans = plan_exploration(20000, 5, 0, 0.1, 16);
  double n = 0;
  for (const auto& p : plans) n += p.exploratory ? 1 : 0;
  const double frac = n / 20000.0;
  EXPECT_NEAR(frac, 0.1, 3.0 * std::sqrt(0.1 * 0.9 / 20000.0));
}

TEST(HrmForward, CapOfOne) {
  Fixture f;
  Rng rng(10);
  f.w.halting_head = randn({2, 16}, rng);
  Tensor h = randn({4, 5, 16}, rng);
  HrmForwardOptions o;
  o.s_max = 1;
  o.halt_bias_delta = -100.0;
  for (const auto& s : hrm_forward(h, f.w, f.rope, f.ctx, o).trace.samples) EXPECT_EQ(s.steps_used, 1);
  o.mode = ForwardMode::kTraining;
  o.p_explore = 1.0;
  for (const auto& s : hrm_forward(h, f.w, f.rope, f.ctx, o).trace.samples) EXPECT_EQ(s.steps_used, 1);
}

TEST(HrmForward, HugeBiasHaltsAtOnce) {
  Fixture f;
  Rng rng(11);
  f.w.halting_head = randn({2, 16}, rng, 5.0f);
  HrmForwardOptions o;
  o.halt_bias_delta = 1e9;
  for (const auto& s : hrm_forward(randn({4, 5, 16}, rng), f.w, f.rope, f.ctx, o).trace.samples) {
    EXPECT_EQ(s.steps_used, 1);
  }
}

TEST(HrmForward, ConfigErrorOnZeroCap) {
  Fixture f;
  HrmForwardOptions o;
  o.s_max = 0;
  EXPECT_THROW(hrm_forward(Tensor({1, 2, 16}), f.w, f.rope, f.ctx, o), ConfigError);
}

TEST(HrmForward, TraceReplaysFromStates) {
  // Recompute each step's scores offline from the states the loop produced.
  Fixture f;
  Rng rng(12);
  f.w.halting_head = randn({2, 16}, rng, 2.0f);
  Tensor h = randn({3, 5, 16}, rng);
  HrmForwardOptions o;
  o.s_max = 6;
  HrmOutput out = hrm_forward(h, f.w, f.rope, f.ctx, o);
  HrmState s = init_states(h);
  for (std::int64_t step = 0; step < static_cast<std::int64_t>(out.step_scores.size()); ++step) {
    low_level_cycle(s, f.w, f.rope, f.ctx);
    high_level_cycle(s, f.w, f.rope, f.ctx);
    Tensor scores = halting_scores(s.z_high, f.w);
    for (int b = 0; b < 3; ++b) {
      const auto& t = out.trace.samples[b];
      if (step >= t.steps_used) continue;
      EXPECT_FLOAT_EQ(t.halt_scores[step], scores.values()[2 * b]);
      EXPECT_FLOAT_EQ(t.continue_scores[step], scores.values()[2 * b + 1]);
    }
    std::vector<bool> halted(3);
    for (int b = 0; b < 3; ++b) halted[b] = out.trace.samples[b].steps_used <= step + 1;
    s.halted = halted;
  }
  for (const auto& t : out.trace.samples) {
    EXPECT_EQ(static_cast<std::int64_t>(t.halt_scores.size()), t.steps_used);
  }
}

TEST(HrmForward, HaltedSamplesFreeze) {
  Fixture f;
  Rng rng(13);
  f.w.halting_head = randn({2, 16}, rng, 3.0f);
  Tensor h = randn({4, 5, 16}, rng);
  HrmForwardOptions o;
  o.s_max = 8;
  HrmOutput out = hrm_forward(h, f.w, f.rope, f.ctx, o);
  // z_out of each sample equals a run capped at that sample's depth.
  for (int b = 0; b < 4; ++b) {
    const auto steps = out.trace.samples[b].steps_used;
    HrmForwardOptions capped = o;
    capped.s_max = steps;
    capped.halt_bias_delta = -1e9;
    Tensor one = hrm_forward(h, f.w, f.rope, f.ctx, capped).z_out;
    for (int i = 0; i < 5 * 16; ++i) EXPECT_EQ(out.z_out.values()[b * 80 + i], one.values()[b * 80 + i]);
  }
}

TEST(HrmForward, DeterministicWithoutExploration) {
  Fixture f;
  Rng rng(14);
  f.w.halting_head = randn({2, 16}, rng, 3.0f);
  Tensor h = randn({4, 5, 16}, rng);
  HrmForwardOptions o;
  o.mode = ForwardMode::kTraining;
  o.seed = 1;
  auto a = hrm_forward(h, f.w, f.rope, f.ctx, o).trace;
  o.seed = 999;
  auto b = hrm_forward(h, f.w, f.rope, f.ctx, o).trace;
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a.samples[i].steps_used, b.samples[i].steps_used);
}

TEST(StepTrace, PopulationStats) {
  StepTrace t;
  t.samples.resize(2);
  t.samples[0].steps_used = 1;
  t.samples[1].steps_used = 5;
  EXPECT_DOUBLE_EQ(t.mean_steps(), 3.0);
  EXPECT_DOUBLE_EQ(t.std_steps(), 2.0);
}

}  // namespace
}  // namespace cfhrm
