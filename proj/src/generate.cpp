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

#include "cfhrm/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfhrm/errors.hpp"
#include "cfhrm/rng.hpp"

namespace cfhrm {

void GenerationRequest::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw UsageError("temperature must be > 0");
  if (max_new_tokens < 1) throw UsageError("max_new_tokens must be >= 1");
  if (top_k && *top_k < 1) throw UsageError("top_k must be >= 1");
}

nlohmann::json TokenTelemetry::to_json() const {
  return {{"token_id", token_id},     {"token_text", token_text}, {"position", position},
          {"steps_used", steps_used}, {"halt_score", halt_score}, {"continue_score", continue_score}};
}

TokenTelemetry TokenTelemetry::from_json(const nlohmann::json& j) {
  TokenTelemetry t;
  t.token_id = j.at("token_id").get<std::int32_t>();
  t.token_text = j.value("token_text", "");
  t.position = j.value("position", std::int64_t{0});
  t.steps_used = j.at("steps_used").get<std::int64_t>();
  t.halt_score = j.value("halt_score", 0.0);
  t.continue_score = j.value("continue_score", 0.0);
  return t;
}

std::int32_t sample_token(std::span<const float> logits, double temperature, std::optional<std::int64_t> top_k,
                          double u) {
  const auto V = static_cast<std::int64_t>(logits.size());
  std::vector<std::int32_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  const auto k = std::min(V, top_k.value_or(V));
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::int32_t a, std::int32_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  if (k == 1) return order[0];
  const double top = logits[order[0]] / temperature;
  std::vector<double> p(static_cast<std::size_t>(k));
  double z = 0.0;
  for (std::int64_t i = 0; i < k; ++i) z += p[i] = std::exp(logits[order[i]] / temperature - top);
  double acc = 0.0;
  const double target = u * z;
  for (std::int64_t i = 0; i < k; ++i) {
    acc += p[i];
    if (target < acc) return order[i];
  }
  return order[k - 1];
}

GenerationResult generate(const GenerationRequest& request, const ModelWeights& w, const ModelConfig& config,
                          const Tokenizer& tokenizer) {
  request.validate();
  std::vector<std::int32_t> ids = tokenizer.encode(request.prompt);
  if (ids.empty()) ids.push_back(tokenizer.eos_id());
  if (static_cast<std::int64_t>(ids.size()) >= config.max_seq_len) {
    throw InputError("prompt is " + std::to_string(ids.size()) + " tokens; it must be shorter than max_seq_len " +
                     std::to_string(config.max_seq_len));
  }
  NoGradGuard no_grad;
  Rng rng(request.seed);
  GenerationResult out;
  ForwardOptions opts;
  opts.mode = ForwardMode::kInference;
  opts.halt_bias_delta = request.halt_bias_delta;
  for (std::int64_t n = 0; n < request.max_new_tokens; ++n) {
    if (static_cast<std::int64_t>(ids.size()) > config.max_seq_len) break;
    TokenGrid grid{1, static_cast<std::int64_t>(ids.size()), ids};
    ForwardResult fwd = model_forward(grid, w, config, opts);
    const auto V = fwd.logits.dim(-1);
    std::span<const float> last = fwd.logits.values().subspan(static_cast<std::size_t>((grid.length - 1) * V),
                                                              static_cast<std::size_t>(V));
    // Only ids the tokenizer can decode are eligible.
    last = last.first(static_cast<std::size_t>(std::min<std::int64_t>(V, tokenizer.size())));
    const std::int32_t id = sample_token(last, request.temperature, request.top_k, rng.uniform());

    const SampleTrace& trace = fwd.hrm.trace.samples.at(0);
    TokenTelemetry t;
    t.token_id = id;
    t.token_text = tokenizer.token_text(id);
    t.position = static_cast<std::int64_t>(ids.size());
    t.steps_used = trace.steps_used;
    t.halt_score = trace.halt_scores.back();
    t.continue_score = trace.continue_scores.back();
    out.telemetry.push_back(std::move(t));
    out.ids.push_back(id);
    ids.push_back(id);
    if (id == tokenizer.eos_id()) break;
    if (static_cast<std::int64_t>(ids.size()) >= config.max_seq_len + 1) break;
  }
  out.text = tokenizer.decode(out.ids);
  return out;
}

}  // namespace cfhrm
