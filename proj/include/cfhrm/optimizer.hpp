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

#include "cfhrm/model.hpp"

namespace cfhrm {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
};

// Decoupled weight decay Adam. Norm gains and the (tied) embedding are not decayed.
class AdamW {
 public:
  AdamW(std::vector<NamedTensor> params, AdamWConfig config);

  // One update with learning rate `lr` from the gradients currently held by the parameters.
  void step(double lr);
  std::int64_t steps_taken() const { return t_; }
  bool decays(std::size_t index) const { return decay_[index]; }
  const std::vector<NamedTensor>& params() const { return params_; }

  void save(const std::string& path) const;
  // Refuses state written for a different parameter set.
  void load(const std::string& path);

 private:
  std::vector<NamedTensor> params_;
  std::vector<bool> decay_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  AdamWConfig config_;
  std::int64_t t_ = 0;
};

bool excluded_from_weight_decay(const std::string& name);

// Linear warmup over warmup_frac of the run, then cosine decay to min_lr_frac of the peak.
double lr_schedule(std::int64_t iteration, std::int64_t total_iterations, double peak, double warmup_frac,
                   double min_lr_frac);

double global_grad_norm(const std::vector<NamedTensor>& params);

// Rescales all gradients so their global L2 norm is at most max_norm. Returns the norm before clipping.
double clip_grad_norm(const std::vector<NamedTensor>& params, double max_norm);

}  // namespace cfhrm
