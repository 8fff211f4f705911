// Copyright 2026 The dtslab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <span>

#include "dts/tensor.hpp"

namespace dts {

/// Builds a scalar loss on `g`; must be a deterministic function of the
/// parameter values.
using LossBuilder = std::function<Tensor(Graph& g)>;

/// Max over every parameter entry of
///   |autodiff - central difference| / max(1, |central difference|).
/// Parameter values are restored before returning.
double grad_check(const LossBuilder& f, std::span<Parameter* const> params, double h = 1e-5);

/// Evaluates f without recording a backward pass.
double evaluate_loss(const LossBuilder& f);

}  // namespace dts
