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
#include <span>

#include "cfhrm/hrm.hpp"
#include "cfhrm/tensor.hpp"

namespace cfhrm {

struct JointLoss {
  Tensor objective;              // lm + surrogate; what backward() runs on
  double total = 0.0;            // lm + lambda * mean steps
  double lm_loss = 0.0;
  double penalty_reported = 0.0;  // lambda * mean steps
  double penalty_surrogate = 0.0;
  double mean_steps = 0.0;
  double std_steps = 0.0;
};

// Differentiable stand-in for the step count: for every continue decision a
// sample made (steps 1 .. steps_used - 1), sigmoid(continue - halt) of that
// step, summed per sample, averaged over the batch and scaled by lambda.
Tensor step_surrogate(const HrmOutput& hrm, double lambda_step);

JointLoss joint_loss(const Tensor& logits, std::span<const std::int32_t> targets, const HrmOutput& hrm,
                     double lambda_step);

}  // namespace cfhrm
