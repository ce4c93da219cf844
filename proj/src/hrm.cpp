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

#include "cfhrm/hrm.hpp"

#include <algorithm>
#include <cmath>

#include "cfhrm/errors.hpp"
#include "cfhrm/ops.hpp"

namespace cfhrm {

namespace {

constexpr std::uint64_t kExplorationStream = 0x4558504cULL;  // "EXPL"

bool any_halted(const std::vector<bool>& halted) {
  return std::find(halted.begin(), halted.end(), true) != halted.end();
}

// Keeps the previous state for halted samples.
Tensor freeze_halted(const std::vector<bool>& halted, const Tensor& previous, const Tensor& next) {
  return any_halted(halted) ? where_samples(halted, previous, next) : next;
}

}  // namespace

HrmWeights init_hrm(const ModelConfig& config, Rng& rng) {
  const auto layout = config.attention();
  const auto d = config.d_model;
  const auto std = static_cast<float>(config.init_std);
  HrmWeights w;
  for (std::int64_t i = 0; i < config.n_low_layers; ++i) w.low_blocks.push_back(init_block(layout, rng, std));
  for (std::int64_t i = 0; i < config.n_high_layers; ++i) w.high_blocks.push_back(init_block(layout, rng, std));
  auto normal = [&](Shape shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.normal(0.0f, std);
    return t.set_requires_grad();
  };
  w.inject_low = normal({d, d});
  w.inject_high = normal({d, d});
  w.halting_head = Tensor::zeros({2, d}).set_requires_grad();
  return w;
}

double StepTrace::mean_steps() const {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : samples) acc += static_cast<double>(s.steps_used);
  return acc / static_cast<double>(samples.size());
}

double StepTrace::std_steps() const {
  if (samples.empty()) return 0.0;
  const double m = mean_steps();
  double acc = 0.0;
  for (const auto& s : samples) acc += (s.steps_used - m) * (s.steps_used - m);
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

std::vector<ExplorationPlan> plan_exploration(std::int64_t batch, std::uint64_t seed,
                                              std::int64_t sample_offset, double p_explore,
                                              std::int64_t s_max) {
  std::vector<ExplorationPlan> plans(static_cast<std::size_t>(batch));
  const std::int64_t lo = std::min<std::int64_t>(2, s_max);
  for (std::int64_t b = 0; b < batch; ++b) {
    Rng rng(mix_seed(seed, kExplorationStream, static_cast<std::uint64_t>(sample_offset + b)));
    plans[b].exploratory = rng.bernoulli(p_explore);
    plans[b].forced_target = rng.uniform_int(lo, s_max);
  }
  return plans;
}

HrmState init_states(const Tensor& h) {
  if (h.rank() != 3) throw ShapeError("hrm: expected [B, T, d] input, got " + shape_string(h.shape()));
  // The two states share no storage; graph links back to h are kept.
  HrmState s;
  s.z_high = scale(h, 1.0f);
  s.z_low = scale(h, 1.0f);
  s.step = 0;
  s.halted.assign(static_cast<std::size_t>(h.dim(0)), false);
  return s;
}

Tensor low_level_cycle(HrmState& state, const HrmWeights& w, const RopeTable& rope, const HrmContext& ctx) {
  // Conditioning uses z_high from before this reasoning step.
  const Tensor injection = linear(state.z_high, w.inject_low);
  for (std::int64_t k = 0; k < ctx.c_low; ++k) {
    Tensor next = stack_forward(add(state.z_low, injection), w.low_blocks, rope, ctx.block);
    state.z_low = freeze_halted(state.halted, state.z_low, next);
  }
  return state.z_low;
}

Tensor high_level_cycle(HrmState& state, const HrmWeights& w, const RopeTable& rope, const HrmContext& ctx) {
  const Tensor injection = linear(state.z_low, w.inject_high);
  for (std::int64_t k = 0; k < ctx.c_high; ++k) {
    Tensor next = stack_forward(add(state.z_high, injection), w.high_blocks, rope, ctx.block);
    state.z_high = freeze_halted(state.halted, state.z_high, next);
  }
  return state.z_high;
}

Tensor halting_scores(const Tensor& z_high, const HrmWeights& w) {
  return linear(mean_pool_time(z_high), w.halting_head);
}

std::vector<bool> decide_halt_training(const Tensor& scores, std::int64_t step,
                                       const std::vector<ExplorationPlan>& plans) {
  const auto B = scores.dim(0);
  if (static_cast<std::int64_t>(plans.size()) != B) throw ShapeError("decide_halt_training: plan count != batch");
  std::vector<bool> halt(static_cast<std::size_t>(B));
  for (std::int64_t b = 0; b < B; ++b) {
    if (plans[b].exploratory) {
      halt[b] = step >= plans[b].forced_target;
    } else {
      halt[b] = scores.values()[2 * b] > scores.values()[2 * b + 1];
    }
  }
  return halt;
}

std::vector<bool> decide_halt_inference(const Tensor& scores, double delta) {
  const auto B = scores.dim(0);
  std::vector<bool> halt(static_cast<std::size_t>(B));
  for (std::int64_t b = 0; b < B; ++b) {
    const double h = static_cast<double>(scores.values()[2 * b]) + delta;
    halt[b] = h > static_cast<double>(scores.values()[2 * b + 1]);
  }
  return halt;
}

HrmOutput hrm_forward(const Tensor& h, const HrmWeights& w, const RopeTable& rope, const HrmContext& ctx,
                      const HrmForwardOptions& options) {
  if (options.s_max < 1) throw ConfigError("hrm: s_max must be >= 1");
  const bool training = options.mode == ForwardMode::kTraining;
  HrmState state = init_states(h);
  const auto B = h.dim(0);

  HrmOutput out;
  out.trace.samples.resize(static_cast<std::size_t>(B));
  std::vector<ExplorationPlan> plans;
  if (training) {
    plans = plan_exploration(B, options.seed, options.sample_offset, options.p_explore, options.s_max);
    for (std::int64_t b = 0; b < B; ++b) {
      out.trace.samples[b].exploratory = plans[b].exploratory;
      if (plans[b].exploratory) out.trace.samples[b].forced_target = plans[b].forced_target;
    }
  }

  for (std::int64_t step = 1; step <= options.s_max; ++step) {
    low_level_cycle(state, w, rope, ctx);
    high_level_cycle(state, w, rope, ctx);
    out.low_cycles += ctx.c_low;
    out.high_cycles += ctx.c_high;
    state.step = step;

    Tensor scores = halting_scores(state.z_high, w);
    out.step_scores.push_back(scores);
    const auto decision = training ? decide_halt_training(scores, step, plans)
                                   : decide_halt_inference(scores, options.halt_bias_delta);
    bool all_halted = true;
    for (std::int64_t b = 0; b < B; ++b) {
      if (state.halted[b]) continue;
      auto& sample = out.trace.samples[b];
      sample.halt_scores.push_back(scores.values()[2 * b]);
      sample.continue_scores.push_back(scores.values()[2 * b + 1]);
      if (decision[b] || step == options.s_max) {
        state.halted[b] = true;
        sample.steps_used = step;
      } else {
        all_halted = false;
      }
    }
    if (all_halted) break;
  }
  out.z_out = state.z_high;
  return out;
}

}  // namespace cfhrm
