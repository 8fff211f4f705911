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

#include "dts/optim.hpp"

#include <cmath>

namespace dts {

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(RowMatrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(RowMatrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          "adam state tracks " + std::to_string(state.m.size()) + " parameters, got " +
              std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    require(p.grad.rows() == p.value.rows() && p.grad.cols() == p.value.cols() &&
                state.m[i].rows() == p.value.rows() && state.m[i].cols() == p.value.cols(),
            "adam shape mismatch for parameter '" + p.name + "'");
  }

  ++state.step;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = p.grad.array();
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.square();
    p.value.array() -= h.lr * (m / c1) / ((v / c2).sqrt() + h.eps);
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params) p->grad *= s;
  }
  return norm;
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace dts
