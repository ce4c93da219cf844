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

#include <functional>

#include "cfhrm/tensor.hpp"

namespace cfhrm {

// Central differences (f(x + h e_i) - f(x - h e_i)) / (2h) for every coordinate of x.
// The divisor is the spacing actually realized in 32-bit storage, so the result is
// exact for quadratics up to float rounding of x +- h. x itself is left unchanged.
Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x, double step);

}  // namespace cfhrm
