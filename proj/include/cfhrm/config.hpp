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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfhrm/transformer.hpp"

namespace cfhrm {

// Architecture hyperparameters plus the training knobs. Defaults reproduce
// the 82.77M-parameter reference configuration.
struct ModelConfig {
  // Architecture.
  std::int64_t d_model = 448;
  std::int64_t vocab_size = 50304;
  std::int64_t max_seq_len = 512;
  std::int64_t n_input_layers = 6;
  std::int64_t n_output_layers = 6;
  std::int64_t n_heads = 8;
  std::int64_t n_kv_heads = 4;
  std::int64_t n_high_layers = 4;
  std::int64_t n_low_layers = 4;
  std::int64_t c_high = 2;
  std::int64_t c_low = 2;
  std::int64_t s_max = 16;
  double p_explore = 0.1;
  double halt_bias_delta = 0.35;
  double dropout = 0.1;
  double lambda_step = 0.01;
  double rope_theta = 10000.0;
  double rms_eps = 1e-6;
  double init_std = 0.02;
  std::uint64_t seed = 1337;

  // Training.
  std::string tokenizer = "byte";  // "byte" or "char"
  std::int64_t iterations = 1000;
  std::int64_t batch_size = 8;
  std::int64_t grad_accum = 16;  // effective batch = batch_size * grad_accum
  std::int64_t seq_len = 512;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double weight_decay = 0.1;
  double warmup_frac = 0.02;
  double min_lr_frac = 0.1;
  double grad_clip = 1.0;
  double val_fraction = 0.02;
  std::int64_t eval_interval = 100;
  std::int64_t eval_batches = 4;
  std::int64_t checkpoint_interval = 500;
  std::int64_t log_interval = 1;

  AttentionLayout attention() const { return {d_model, n_heads, n_kv_heads}; }

  // Throws ConfigError naming every violated constraint.
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);
  static ModelConfig load(const std::string& path);

  bool operator==(const ModelConfig&) const = default;
};

// "field: a -> b" for every differing field.
std::vector<std::string> config_diff(const ModelConfig& a, const ModelConfig& b);

}  // namespace cfhrm
