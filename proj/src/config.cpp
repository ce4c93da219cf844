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

#include "cfhrm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cfhrm/errors.hpp"

namespace cfhrm {

// Field list shared by serialization and diffing; order defines JSON layout.
#define CFHRM_CONFIG_FIELDS(X) \
  X(d_model)                   \
  X(vocab_size)                \
  X(max_seq_len)               \
  X(n_input_layers)            \
  X(n_output_layers)           \
  X(n_heads)                   \
  X(n_kv_heads)                \
  X(n_high_layers)             \
  X(n_low_layers)              \
  X(c_high)                    \
  X(c_low)                     \
  X(s_max)                     \
  X(p_explore)                 \
  X(halt_bias_delta)           \
  X(dropout)                   \
  X(lambda_step)               \
  X(rope_theta)                \
  X(rms_eps)                   \
  X(init_std)                  \
  X(seed)                      \
  X(tokenizer)                 \
  X(iterations)                \
  X(batch_size)                \
  X(grad_accum)                \
  X(seq_len)                   \
  X(learning_rate)             \
  X(beta1)                     \
  X(beta2)                     \
  X(adam_eps)                  \
  X(weight_decay)              \
  X(warmup_frac)               \
  X(min_lr_frac)               \
  X(grad_clip)                 \
  X(val_fraction)              \
  X(eval_interval)             \
  X(eval_batches)              \
  X(checkpoint_interval)       \
  X(log_interval)

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  need(d_model >= 1, "d_model >= 1");
  need(vocab_size >= 1, "vocab_size >= 1");
  need(max_seq_len >= 1, "max_seq_len >= 1");
  need(n_input_layers >= 1 && n_output_layers >= 1, "n_input_layers, n_output_layers >= 1");
  need(n_high_layers >= 1 && n_low_layers >= 1, "n_high_layers, n_low_layers >= 1");
  need(c_high >= 1 && c_low >= 1, "c_high, c_low >= 1");
  need(s_max >= 1, "s_max >= 1");
  need(n_heads >= 1 && n_kv_heads >= 1, "n_heads, n_kv_heads >= 1");
  if (n_heads >= 1) need(d_model % n_heads == 0, "d_model divisible by n_heads");
  if (n_kv_heads >= 1) need(n_heads % n_kv_heads == 0, "n_heads divisible by n_kv_heads");
  if (n_heads >= 1 && d_model % n_heads == 0) need((d_model / n_heads) % 2 == 0, "head dimension even");
  need(p_explore >= 0.0 && p_explore <= 1.0, "p_explore in [0, 1]");
  need(dropout >= 0.0 && dropout < 1.0, "dropout in [0, 1)");
  need(lambda_step >= 0.0, "lambda_step >= 0");
  need(rms_eps > 0.0, "rms_eps > 0");
  need(rope_theta > 0.0, "rope_theta > 0");
  need(init_std > 0.0, "init_std > 0");
  need(tokenizer == "byte" || tokenizer == "char", "tokenizer is \"byte\" or \"char\"");
  need(iterations >= 1, "iterations >= 1");
  need(batch_size >= 1 && grad_accum >= 1, "batch_size, grad_accum >= 1");
  need(seq_len >= 1 && seq_len <= max_seq_len, "1 <= seq_len <= max_seq_len");
  need(learning_rate > 0.0, "learning_rate > 0");
  need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas in [0, 1)");
  need(weight_decay >= 0.0, "weight_decay >= 0");
  need(warmup_frac >= 0.0 && warmup_frac < 1.0, "warmup_frac in [0, 1)");
  need(min_lr_frac >= 0.0 && min_lr_frac <= 1.0, "min_lr_frac in [0, 1]");
  need(grad_clip > 0.0, "grad_clip > 0");
  need(val_fraction >= 0.0 && val_fraction < 1.0, "val_fraction in [0, 1)");
  need(eval_interval >= 0 && checkpoint_interval >= 0 && log_interval >= 1,
       "eval_interval, checkpoint_interval >= 0 and log_interval >= 1");
  need(eval_batches >= 1, "eval_batches >= 1");
  if (!problems.empty()) {
    std::ostringstream os;
    os << "invalid config, violated:";
    for (const auto& p : problems) os << "\n  - " << p;
    throw ConfigError(os.str());
  }
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
#define CFHRM_TO_JSON(name) j[#name] = name;
  CFHRM_CONFIG_FIELDS(CFHRM_TO_JSON)
#undef CFHRM_TO_JSON
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ModelConfig c;
  std::set<std::string> known;
#define CFHRM_FROM_JSON(name)                                                          \
  known.insert(#name);                                                                 \
  if (j.contains(#name)) {                                                             \
    try {                                                                              \
      j.at(#name).get_to(c.name);                                                      \
    } catch (const nlohmann::json::exception& e) {                                     \
      throw ConfigError(std::string("config field '" #name "' has the wrong type: ") + \
                        e.what());                                                     \
    }                                                                                  \
  }
  CFHRM_CONFIG_FIELDS(CFHRM_FROM_JSON)
#undef CFHRM_FROM_JSON
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");
  }
  return c;
}

ModelConfig ModelConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::vector<std::string> config_diff(const ModelConfig& a, const ModelConfig& b) {
  std::vector<std::string> out;
  const auto ja = a.to_json(), jb = b.to_json();
  for (const auto& [key, value] : ja.items()) {
    if (value != jb.at(key)) out.push_back(key + ": " + value.dump() + " -> " + jb.at(key).dump());
  }
  return out;
}

}  // namespace cfhrm
