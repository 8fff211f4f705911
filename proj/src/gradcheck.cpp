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

#include "dts/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dts/optim.hpp"

namespace dts {

double evaluate_loss(const LossBuilder& f) {
  Graph g(false);
  const double v = f(g).item();
  if (!std::isfinite(v)) throw NumericFailure("grad_check: loss evaluated to a non-finite value");
  return v;
}

double grad_check(const LossBuilder& f, std::span<Parameter* const> params, double h) {
  require(h > 0.0, "grad_check step must be positive");
  zero_grads(params);
  {
    Graph g;
    g.backward(f(g));
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    const RowMatrix analytic = p->grad;
    for (Index k = 0; k < p->value.size(); ++k) {
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + h;
      const double up = evaluate_loss(f);
      x = saved - h;
      const double down = evaluate_loss(f);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic.data()[k] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  zero_grads(params);
  return worst;
}

}  // namespace dts
