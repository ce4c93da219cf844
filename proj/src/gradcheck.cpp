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

#include "cfhrm/gradcheck.hpp"

#include "cfhrm/errors.hpp"

namespace cfhrm {

Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x, double step) {
  if (!(step > 0.0)) throw UsageError("finite_difference: step must be > 0");
  NoGradGuard no_grad;
  Tensor probe = x.detach();
  Tensor out(x.shape());
  auto v = probe.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float saved = v[i];
    const auto up = static_cast<float>(saved + step);
    const auto down = static_cast<float>(saved - step);
    v[i] = up;
    const double f_up = f(probe);
    v[i] = down;
    const double f_down = f(probe);
    v[i] = saved;
    out.values()[i] = static_cast<float>((f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down)));
  }
  return out;
}

}  // namespace cfhrm
