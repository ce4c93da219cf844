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

#include "cfhrm/model.hpp"

#include <unordered_set>

#include "cfhrm/errors.hpp"
#include "cfhrm/ops.hpp"

namespace cfhrm {

namespace {

constexpr std::uint64_t kDropoutStream = 0x44524f50ULL;  // "DROP"

void append_block(std::vector<NamedTensor>& out, const std::string& prefix, const BlockWeights& b) {
  for (auto& [suffix, t] : b.named()) out.emplace_back(prefix + "." + suffix, t);
}

}  // namespace

std::vector<NamedTensor> ModelWeights::named_parameters() const {
  std::vector<NamedTensor> out;
  out.emplace_back("embedding", embedding);
  for (std::size_t i = 0; i < input_blocks.size(); ++i) append_block(out, "input." + std::to_string(i), input_blocks[i]);
  for (std::size_t i = 0; i < hrm.low_blocks.size(); ++i) append_block(out, "hrm.low." + std::to_string(i), hrm.low_blocks[i]);
  for (std::size_t i = 0; i < hrm.high_blocks.size(); ++i) append_block(out, "hrm.high." + std::to_string(i), hrm.high_blocks[i]);
  out.emplace_back("hrm.inject_low", hrm.inject_low);
  out.emplace_back("hrm.inject_high", hrm.inject_high);
  out.emplace_back("hrm.halting_head", hrm.halting_head);
  for (std::size_t i = 0; i < output_blocks.size(); ++i) append_block(out, "output." + std::to_string(i), output_blocks[i]);
  out.emplace_back("final_gamma", final_gamma);
  return out;
}

void ModelWeights::zero_grad() {
  for (auto& [name, t] : named_parameters()) t.zero_grad();
}

ModelWeights build_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  const auto layout = config.attention();
  const auto d = config.d_model;
  const auto std = static_cast<float>(config.init_std);
  ModelWeights w;
  w.embedding = Tensor({config.vocab_size, d});
  for (auto& v : w.embedding.values()) v = rng.normal(0.0f, std);
  w.embedding.set_requires_grad();
  for (std::int64_t i = 0; i < config.n_input_layers; ++i) w.input_blocks.push_back(init_block(layout, rng, std));
  w.hrm = init_hrm(config, rng);
  for (std::int64_t i = 0; i < config.n_output_layers; ++i) w.output_blocks.push_back(init_block(layout, rng, std));
  w.final_gamma = Tensor::ones({d}).set_requires_grad();
  return w;
}

ModelWeights build_model(const ModelConfig& config) {
  Rng rng(config.seed);
  return build_model(config, rng);
}

std::int64_t count_parameters(const ModelWeights& w) {
  std::unordered_set<const TensorImpl*> seen;
  std::int64_t total = 0;
  auto visit = [&](const Tensor& t) {
    if (seen.insert(t.impl().get()).second) total += t.numel();
  };
  visit(w.lm_head());
  for (const auto& [name, t] : w.named_parameters()) visit(t);
  return total;
}

ForwardResult model_forward(const TokenGrid& tokens, const ModelWeights& w, const ModelConfig& config,
                            const ForwardOptions& options) {
  const auto B = tokens.batch, T = tokens.length;
  if (B < 1 || T < 1 || static_cast<std::int64_t>(tokens.ids.size()) != B * T) {
    throw InputError("model_forward: token grid is empty or inconsistent");
  }
  if (T > config.max_seq_len) {
    throw InputError("model_forward: sequence length " + std::to_string(T) + " exceeds max_seq_len " +
                     std::to_string(config.max_seq_len));
  }
  for (auto id : tokens.ids) {
    if (id < 0 || id >= config.vocab_size) {
      throw InputError("model_forward: token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(config.vocab_size));
    }
  }
  const bool training = options.mode == ForwardMode::kTraining;
  Rng dropout_rng(mix_seed(options.seed, kDropoutStream));
  RopeTable rope(T, config.attention().head_dim(), config.rope_theta);

  BlockContext block;
  block.layout = config.attention();
  block.rms_eps = static_cast<float>(config.rms_eps);
  block.dropout = static_cast<float>(config.dropout);
  block.training = training;
  block.rng = &dropout_rng;

  Tensor h = embedding(w.embedding, tokens.ids, {B, T});
  if (training && config.dropout > 0.0) h = dropout(h, static_cast<float>(config.dropout), dropout_rng);
  h = stack_forward(h, w.input_blocks, rope, block);

  HrmContext hrm_ctx{block, config.c_low, config.c_high};
  HrmForwardOptions hrm_opts;
  hrm_opts.mode = options.mode;
  hrm_opts.s_max = config.s_max;
  hrm_opts.p_explore = config.p_explore;
  hrm_opts.halt_bias_delta = options.halt_bias_delta.value_or(config.halt_bias_delta);
  hrm_opts.seed = options.seed;
  hrm_opts.sample_offset = options.sample_offset;

  ForwardResult result;
  result.hrm = hrm_forward(h, w.hrm, rope, hrm_ctx, hrm_opts);
  Tensor z = stack_forward(result.hrm.z_out, w.output_blocks, rope, block);
  z = rms_norm(z, w.final_gamma, block.rms_eps);
  result.logits = linear(z, w.lm_head());
  return result;
}

}  // namespace cfhrm
