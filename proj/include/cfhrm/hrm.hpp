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
#include <optional>
#include <vector>

#include "cfhrm/config.hpp"
#include "cfhrm/rng.hpp"
#include "cfhrm/tensor.hpp"
#include "cfhrm/transformer.hpp"

namespace cfhrm {

enum class ForwardMode { kTraining, kInference };

// Hierarchical reasoning core weights. The second argument of each module
// enters through an additive d x d injection ahead of its block stack.
struct HrmWeights {
  std::vector<BlockWeights> low_blocks;
  std::vector<BlockWeights> high_blocks;
  Tensor inject_low;    // [d, d], projects z_high into the low-level stream
  Tensor inject_high;   // [d, d], projects z_low into the high-level stream
  Tensor halting_head;  // [2, d]; row 0 = halt, row 1 = continue
};

// Normal(0, init_std) blocks and injections; zero halting head.
HrmWeights init_hrm(const ModelConfig& config, Rng& rng);

struct HrmState {
  Tensor z_high;  // [B, T, d]
  Tensor z_low;   // [B, T, d]
  std::int64_t step = 0;
  std::vector<bool> halted;
};

// Halting record of one sample for one forward pass.
struct SampleTrace {
  std::int64_t steps_used = 0;
  std::vector<float> halt_scores;      // one entry per executed step
  std::vector<float> continue_scores;  // one entry per executed step
  bool exploratory = false;            // fixed for the whole forward
  std::optional<std::int64_t> forced_target;
};

struct StepTrace {
  std::vector<SampleTrace> samples;

  double mean_steps() const;
  // Population standard deviation of steps_used.
  double std_steps() const;
};

// Per-sample exploration decision, drawn once per forward.
struct ExplorationPlan {
  bool exploratory = false;
  std::int64_t forced_target = 0;  // uniform over {2, ..., s_max}
};

// One independent stream per sample: mix(seed, sample_offset + b).
std::vector<ExplorationPlan> plan_exploration(std::int64_t batch, std::uint64_t seed,
                                              std::int64_t sample_offset, double p_explore,
                                              std::int64_t s_max);

struct HrmContext {
  BlockContext block;
  std::int64_t c_low = 2;
  std::int64_t c_high = 2;
};

// Both states start as independent copies of h.
HrmState init_states(const Tensor& h);

// c_low cycles of z_low <- LowBlocks(z_low + inject_low(z_high)); halted samples keep their state.
Tensor low_level_cycle(HrmState& state, const HrmWeights& w, const RopeTable& rope, const HrmContext& ctx);

// c_high cycles of z_high <- HighBlocks(z_high + inject_high(z_low)); halted samples keep their state.
Tensor high_level_cycle(HrmState& state, const HrmWeights& w, const RopeTable& rope, const HrmContext& ctx);

// [B, T, d] -> [B, 2]: W_Q applied to the time-mean of z_high.
Tensor halting_scores(const Tensor& z_high, const HrmWeights& w);

// Exploratory samples halt once step >= forced_target; the rest when halt > continue.
std::vector<bool> decide_halt_training(const Tensor& scores, std::int64_t step,
                                       const std::vector<ExplorationPlan>& plans);

// halt + delta > continue.
std::vector<bool> decide_halt_inference(const Tensor& scores, double delta);

struct HrmForwardOptions {
  ForwardMode mode = ForwardMode::kInference;
  std::int64_t s_max = 16;
  double p_explore = 0.0;
  double halt_bias_delta = 0.0;
  std::uint64_t seed = 0;
  std::int64_t sample_offset = 0;
};

struct HrmOutput {
  Tensor z_out;                      // z_high at each sample's halting step
  StepTrace trace;
  std::vector<Tensor> step_scores;   // [B, 2] per executed step, graph-connected
  std::int64_t low_cycles = 0;       // inner cycles actually run
  std::int64_t high_cycles = 0;
};

HrmOutput hrm_forward(const Tensor& h, const HrmWeights& w, const RopeTable& rope, const HrmContext& ctx,
                      const HrmForwardOptions& options);

}  // namespace cfhrm
