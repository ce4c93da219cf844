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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfhrm/config.hpp"
#include "cfhrm/hrm.hpp"
#include "cfhrm/rng.hpp"
#include "cfhrm/tensor.hpp"
#include "cfhrm/transformer.hpp"

namespace cfhrm {

using NamedTensor = std::pair<std::string, Tensor>;

struct ModelWeights {
  Tensor embedding;  // [V, d]; also the LM head (tied storage)
  std::vector<BlockWeights> input_blocks;
  std::vector<BlockWeights> output_blocks;
  HrmWeights hrm;
  Tensor final_gamma;  // [d]

  // Same storage as the embedding.
  const Tensor& lm_head() const { return embedding; }

  // Every trainable tensor exactly once, in checkpoint order.
  std::vector<NamedTensor> named_parameters() const;
  void zero_grad();
};

// Validates the config and draws every weight from `rng`.
ModelWeights build_model(const ModelConfig& config, Rng& rng);
// Seeds from config.seed.
ModelWeights build_model(const ModelConfig& config);

// Trainable scalars, tied storage counted once.
std::int64_t count_parameters(const ModelWeights& w);

// Row-major [batch, length] token ids.
struct TokenGrid {
  std::int64_t batch = 0;
  std::int64_t length = 0;
  std::vector<std::int32_t> ids;

  std::span<const std::int32_t> row(std::int64_t b) const {
    return std::span<const std::int32_t>(ids).subspan(static_cast<std::size_t>(b * length),
                                                       static_cast<std::size_t>(length));
  }
};

struct ForwardOptions {
  ForwardMode mode = ForwardMode::kInference;
  std::uint64_t seed = 0;
  // Global index of row 0; per-sample exploration streams use offset + b.
  std::int64_t sample_offset = 0;
  // Overrides config.halt_bias_delta in inference mode.
  std::optional<double> halt_bias_delta;
};

struct ForwardResult {
  Tensor logits;  // [B, T, V]
  HrmOutput hrm;
};

// embed -> input blocks -> HRM -> output blocks -> final RMSNorm -> tied LM head.
ForwardResult model_forward(const TokenGrid& tokens, const ModelWeights& w, const ModelConfig& config,
                            const ForwardOptions& options);

}  // namespace cfhrm
