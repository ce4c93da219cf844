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

#include "cfhrm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cfhrm/checkpoint.hpp"
#include "cfhrm/errors.hpp"

namespace cfhrm {

bool excluded_from_weight_decay(const std::string& name) {
  return name == "embedding" || name.find("gamma") != std::string::npos;
}

AdamW::AdamW(std::vector<NamedTensor> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& [name, t] : params_) {
    decay_.push_back(!excluded_from_weight_decay(name));
    m_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0f);
    v_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0f);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    auto g = p.grad();
    if (g.empty()) continue;
    auto x = p.values();
    auto& m = m_[i];
    auto& v = v_[i];
    const float decay = decay_[i] ? static_cast<float>(1.0 - lr * config_.weight_decay) : 1.0f;
    const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
    const auto step = static_cast<float>(lr / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    const auto eps = static_cast<float>(config_.eps);
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = fb1 * m[k] + (1.0f - fb1) * g[k];
      v[k] = fb2 * v[k] + (1.0f - fb2) * g[k] * g[k];
      x[k] = x[k] * decay - step * m[k] / (std::sqrt(v[k] * inv_c2) + eps);
    }
  }
}

void AdamW::save(const std::string& path) const {
  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Shape& shape = params_[i].second.shape();
    tensors.emplace_back(params_[i].first + ".m", Tensor(shape, m_[i]));
    tensors.emplace_back(params_[i].first + ".v", Tensor(shape, v_[i]));
  }
  write_tensor_file(path, nlohmann::json{{"kind", "adamw"}, {"step", t_}}, tensors);
}

void AdamW::load(const std::string& path) {
  TensorFile file = read_tensor_file(path);
  if (file.header.value("kind", "") != "adamw" || !file.header.contains("step")) {
    throw DataError(path + ": not an optimizer state file");
  }
  if (file.tensors.size() != 2 * params_.size()) throw DataError(path + ": optimizer state covers a different model");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& [mname, m] = file.tensors[2 * i];
    const auto& [vname, v] = file.tensors[2 * i + 1];
    if (mname != params_[i].first + ".m" || vname != params_[i].first + ".v" ||
        m.shape() != params_[i].second.shape() || v.shape() != params_[i].second.shape()) {
      throw DataError(path + ": optimizer state does not match parameter '" + params_[i].first + "'");
    }
    m_[i].assign(m.values().begin(), m.values().end());
    v_[i].assign(v.values().begin(), v.values().end());
  }
  t_ = file.header.at("step").get<std::int64_t>();
}

double lr_schedule(std::int64_t iteration, std::int64_t total_iterations, double peak, double warmup_frac,
                   double min_lr_frac) {
  const auto total = std::max<std::int64_t>(total_iterations, 1);
  const auto warmup = static_cast<std::int64_t>(std::ceil(warmup_frac * static_cast<double>(total)));
  if (iteration < warmup) return peak * static_cast<double>(iteration + 1) / static_cast<double>(warmup);
  const auto span = std::max<std::int64_t>(total - warmup, 1);
  const double progress = std::clamp(static_cast<double>(iteration - warmup) / static_cast<double>(span), 0.0, 1.0);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return peak * (min_lr_frac + (1.0 - min_lr_frac) * cosine);
}

double global_grad_norm(const std::vector<NamedTensor>& params) {
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<NamedTensor>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (norm > max_norm && norm > 0.0) {
    const auto s = static_cast<float>(max_norm / norm);
    for (const auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      for (float& g : p.grad_buffer()) g *= s;
    }
  }
  return norm;
}

}  // namespace cfhrm
