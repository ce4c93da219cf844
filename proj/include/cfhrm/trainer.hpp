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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfhrm/config.hpp"
#include "cfhrm/data.hpp"
#include "cfhrm/errors.hpp"
#include "cfhrm/model.hpp"
#include "cfhrm/optimizer.hpp"
#include "cfhrm/tokenizer.hpp"

namespace cfhrm {

struct TrainMetrics {
  std::int64_t iteration = 0;  // 1-based count of completed updates
  double lm_loss = 0.0;
  double step_penalty = 0.0;   // lambda * mean_steps
  double total_loss = 0.0;     // lm_loss + step_penalty
  double surrogate_penalty = 0.0;
  double mean_steps = 0.0;
  double steps_std = 0.0;
  double explore_fraction = 0.0;
  double learning_rate = 0.0;
  double grad_norm = 0.0;      // before clipping
  std::int64_t tokens_seen = 0;
  std::optional<double> val_loss;
  std::optional<double> val_mean_steps;

  nlohmann::json to_json() const;
  static TrainMetrics from_json(const nlohmann::json& j);
};

// Raised when the loss stops being finite; carries what is needed to replay the batch.
class NonFiniteLossError : public NumericError {
 public:
  NonFiniteLossError(const std::string& what, nlohmann::json dump) : NumericError(what), dump_(std::move(dump)) {}
  const nlohmann::json& dump() const { return dump_; }

 private:
  nlohmann::json dump_;
};

// Seed of the forward pass for micro-batch `micro` of update `iteration` (0-based).
std::uint64_t forward_seed(std::uint64_t seed, std::int64_t iteration, std::int64_t micro);
// Seed of the batch draw for update `iteration` (0-based).
std::uint64_t batch_seed(std::uint64_t seed, std::int64_t iteration);

// Draws the grad_accum micro-batches of one update.
std::vector<TrainBatch> draw_update_batches(std::span<const std::int32_t> stream, const ModelConfig& config,
                                            std::int64_t iteration);

// Training-mode forward, joint loss, backward, clip and one optimizer update over the
// micro-batches of update `iteration` (0-based). Gradients are averaged over micro-batches.
TrainMetrics train_step(ModelWeights& w, AdamW& optimizer, const std::vector<TrainBatch>& micro_batches,
                        const ModelConfig& config, std::int64_t iteration);

struct EvalResult {
  double loss = 0.0;
  double mean_steps = 0.0;
};

// Inference mode (no exploration, no dropout) with delta = 0 over a fixed set of batches.
EvalResult evaluate(const ModelWeights& w, const ModelConfig& config, std::span<const std::int32_t> stream);

struct TrainLoopOptions {
  std::string out_dir;
  std::optional<std::string> resume;  // checkpoint path; its ".optim" sidecar must exist
  std::optional<std::int64_t> stop_after;  // stop (and checkpoint) once this many updates are done
  std::function<void(const TrainMetrics&)> on_metrics;
};

struct TrainLoopResult {
  ModelWeights weights;
  std::vector<TrainMetrics> history;  // rows written by this invocation
  std::string last_checkpoint;
};

// Splits off the held-out tail, trains, appends metrics.jsonl, writes ckpt_<iter>.bin
// (+ .optim) periodically and final.bin at the end.
TrainLoopResult train_loop(const ModelConfig& config, std::span<const std::int32_t> stream, const Tokenizer& tokenizer,
                           const TrainLoopOptions& options);

std::string checkpoint_name(std::int64_t iteration);

}  // namespace cfhrm
