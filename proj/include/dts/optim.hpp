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

#include <span>
#include <vector>

#include "dts/tensor.hpp"

namespace dts {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators, aligned with the parameter list given to
/// adam_step(). Empty moments are zero-initialized on the first update.
struct AdamState {
  AdamConfig hyper;
  std::vector<RowMatrix> m;
  std::vector<RowMatrix> v;
  long step = 0;
};

/// One bias-corrected Adam update from each parameter's `grad`.
void adam_step(std::span<Parameter* const> params, AdamState& state);

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. A non-positive max_norm disables clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

void zero_grads(std::span<Parameter* const> params);

}  // namespace dts
