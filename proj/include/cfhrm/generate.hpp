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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfhrm/config.hpp"
#include "cfhrm/model.hpp"
#include "cfhrm/tokenizer.hpp"

namespace cfhrm {

struct GenerationRequest {
  std::string prompt;
  std::int64_t max_new_tokens = 64;
  double temperature = 1.0;
  std::optional<std::int64_t> top_k;  // 1 is greedy decoding
  std::uint64_t seed = 0;
  std::optional<double> halt_bias_delta;

  // Throws UsageError on temperature <= 0, max_new_tokens < 1 or top_k < 1.
  void validate() const;
};

struct TokenTelemetry {
  std::int32_t token_id = 0;
  std::string token_text;
  std::int64_t position = 0;    // index of the emitted token in the full sequence
  std::int64_t steps_used = 0;  // of the forward pass that emitted the token
  double halt_score = 0.0;      // at the halting step
  double continue_score = 0.0;

  nlohmann::json to_json() const;
  static TokenTelemetry from_json(const nlohmann::json& j);
};

struct GenerationResult {
  std::string text;  // generated continuation only
  std::vector<std::int32_t> ids;
  std::vector<TokenTelemetry> telemetry;  // one row per emitted token
};

// Temperature scaling, optional top-k truncation, then a draw with `u` in [0, 1).
// Ties in top-k keep the lower id.
std::int32_t sample_token(std::span<const float> logits, double temperature, std::optional<std::int64_t> top_k,
                          double u);

// Autoregressive decoding. Every token re-runs the full prefix in inference mode;
// stops after max_new_tokens, at the end-of-document id (which is emitted and
// recorded) or when the prefix fills max_seq_len.
GenerationResult generate(const GenerationRequest& request, const ModelWeights& w, const ModelConfig& config,
                          const Tokenizer& tokenizer);

}  // namespace cfhrm
