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

#include "cfhrm/objective.hpp"

#include "cfhrm/errors.hpp"
#include "cfhrm/ops.hpp"

namespace cfhrm {

Tensor step_surrogate(const HrmOutput& hrm, double lambda_step) {
  const auto& samples = hrm.trace.samples;
  const auto B = static_cast<std::int64_t>(samples.size());
  if (B == 0) throw UsageError("step_surrogate: empty trace");
  Tensor acc;
  for (std::size_t s = 0; s < hrm.step_scores.size(); ++s) {
    // Rows whose sample continued after this step.
    std::vector<float> keep(static_cast<std::size_t>(B), 0.0f);
    bool any = false;
    for (std::int64_t b = 0; b < B; ++b) {
      if (static_cast<std::int64_t>(s) + 1 < samples[b].steps_used) {
        keep[b] = 1.0f;
        any = true;
      }
    }
    if (!any) continue;
    const Tensor& scores = hrm.step_scores[s];
    Tensor gap = sigmoid(sub(column(scores, 1), column(scores, 0)));
    Tensor term = sum(mul(gap, Tensor({B}, std::move(keep))));
    acc = acc.defined() ? add(acc, term) : term;
  }
  if (!acc.defined()) return Tensor::scalar(0.0f);
  return scale(acc, static_cast<float>(lambda_step / static_cast<double>(B)));
}

JointLoss joint_loss(const Tensor& logits, std::span<const std::int32_t> targets, const HrmOutput& hrm,
                     double lambda_step) {
  if (hrm.trace.samples.empty() || static_cast<std::int64_t>(hrm.trace.samples.size()) != logits.dim(0)) {
    throw UsageError("joint_loss: trace does not cover every batch sample");
  }
  JointLoss out;
  Tensor lm = cross_entropy_next_token(logits, targets);
  out.lm_loss = lm.item();
  out.mean_steps = hrm.trace.mean_steps();
  out.std_steps = hrm.trace.std_steps();
  out.penalty_reported = lambda_step * out.mean_steps;
  out.total = out.lm_loss + out.penalty_reported;
  if (lambda_step == 0.0) {
    out.objective = lm;
    return out;
  }
  Tensor surrogate = step_surrogate(hrm, lambda_step);
  out.penalty_surrogate = surrogate.item();
  out.objective = add(lm, surrogate);
  return out;
}

}  // namespace cfhrm
