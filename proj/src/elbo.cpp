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

#include "dts/elbo.hpp"

#include <algorithm>

namespace dts {

Tensor kl_diag_gaussian(const GaussianPosterior& post) {
  const Tensor var = exp(2.0 * post.log_std);
  return 0.5 * (square(post.mean) + var - 1.0 - 2.0 * post.log_std);
}

Tensor recon_loglik(const Tensor& x, const Tensor& x_hat, int batch_axis) {
  require(x.shape() == x_hat.shape(), "recon_loglik shape mismatch " + to_string(x.shape()) + " vs " +
                                          to_string(x_hat.shape()));
  const double batch = static_cast<double>(x.dim(batch_axis));
  const double per_row = static_cast<double>(x.size()) / batch;
  return affine(sum(square(x - x_hat)), -0.5 / batch, -per_row * kHalfLog2Pi<double>);
}

DecompositionTensors decompose_minibatch(Graph& g, const Tensor& z, const GaussianPosterior& post,
                                         Index dataset_size) {
  const Index B = z.dim(0);
  require(B >= 2, "decomposition estimator needs a batch of at least 2 rows");
  require(dataset_size >= B, "dataset size " + std::to_string(dataset_size) + " smaller than batch " +
                                 std::to_string(B));
  require(post.mean.dim(0) == B && post.mean.shape() == z.shape(), "decomposition: z/posterior shapes differ");

  const double n = static_cast<double>(dataset_size);
  const double log_self = -std::log(n);
  const double log_other = std::log((n - 1.0) / (n * static_cast<double>(B - 1)));
  Array logw(B * B);
  for (Index i = 0; i < B; ++i)
    for (Index j = 0; j < B; ++j) logw[i * B + j] = (i == j) ? log_self : log_other;
  const Tensor log_weights = g.constant({B, B}, logw);
  const Tensor log_weights3 = g.constant({B, B, 1}, logw);

  const Tensor pair = pairwise_log_normal(z, post.mean, post.log_std);  // [B, B, Z]
  const Tensor log_qz = logsumexp(sum(pair, 2) + log_weights, 1);
  const Tensor log_prod_qz = sum(logsumexp(pair + log_weights3, 1), 1);

  const Tensor w = (z - post.mean) * exp(-post.log_std);
  const Tensor log_qzx = sum(-0.5 * square(w) - post.log_std - kHalfLog2Pi<double>, 1);
  const Tensor log_pz = sum(-0.5 * square(z) - kHalfLog2Pi<double>, 1);

  return {mean(log_qzx - log_qz), mean(log_qz - log_prod_qz), mean(log_prod_qz - log_pz)};
}

std::string to_string(ObjectiveMode mode) {
  switch (mode) {
    case ObjectiveMode::Vanilla: return "vanilla";
    case ObjectiveMode::Beta: return "beta";
    case ObjectiveMode::Dts: return "dts";
  }
  return "?";
}

ObjectiveMode parse_objective_mode(const std::string& s) {
  if (s == "vanilla") return ObjectiveMode::Vanilla;
  if (s == "beta") return ObjectiveMode::Beta;
  if (s == "dts") return ObjectiveMode::Dts;
  throw ContractViolation("unknown objective mode '" + s + "' (expected vanilla, beta or dts)");
}

std::vector<std::string> ObjectiveConfig::validate() const {
  require(std::isfinite(alpha) && alpha >= 0.0, "objective.alpha must be >= 0");
  require(std::isfinite(beta), "objective.beta must be finite");
  if (mode != ObjectiveMode::Vanilla) require(beta >= 1.0, "objective.beta must be >= 1 outside vanilla mode");
  require(dataset_size >= 1, "dataset size must be positive");
  std::vector<std::string> warnings;
  const TermWeights w = weights();
  if (w.mi < -10.0) {
    warnings.push_back("MI weight beta - alpha = " + std::to_string(w.mi) +
                       " < -10: runaway mutual-information maximization likely");
  }
  return warnings;
}

TermWeights ObjectiveConfig::weights() const {
  switch (mode) {
    case ObjectiveMode::Vanilla: return {1.0, 1.0, 1.0};
    case ObjectiveMode::Beta: return {beta, beta, beta};
    case ObjectiveMode::Dts: return {beta - alpha, beta, beta};
  }
  return {};
}

double objective(const ObjectiveConfig& cfg, const DecompositionTerms& t) {
  const TermWeights w = cfg.weights();
  return -t.recon_loglik + w.mi * t.index_code_mi + w.tc * t.total_correlation + w.dim_kl * t.dimension_kl;
}

Tensor objective(const ObjectiveConfig& cfg, const DecompositionTensors& t, const Tensor& recon) {
  const TermWeights w = cfg.weights();
  return -recon + w.mi * t.index_code_mi + w.tc * t.total_correlation + w.dim_kl * t.dimension_kl;
}

DecompositionTerms decompose_dataset(const PosteriorValues& post, Index samples, CounterRng rng, Index megabatch,
                                     VaeModel* model, const RowMatrix* windows, Index steps) {
  const Index N = post.mean.rows(), Z = post.mean.cols();
  require(N >= 2, "decomposition report needs at least 2 windows");
  require(samples >= 1, "decomposition report needs at least one sample");
  require(megabatch >= 4, "mega-batch size must be at least 4");
  const Index chunks = (N + megabatch - 1) / megabatch;
  DecompositionTerms acc;
  double weight_total = 0.0;
  for (Index s = 0; s < samples; ++s) {
    CounterRng draw = rng.split({static_cast<std::uint64_t>(s)});
    RowMatrix noise(N, Z);
    for (Index k = 0; k < noise.size(); ++k) noise.data()[k] = draw.normal();
    const RowMatrix z = post.mean.array() + post.log_std.array().exp() * noise.array();
    for (Index c = 0; c < chunks; ++c) {
      const Index start = c * N / chunks, len = (c + 1) * N / chunks - start;
      Graph g(false);
      const GaussianPosterior p{g.constant(RowMatrix(post.mean.middleRows(start, len))),
                                g.constant(RowMatrix(post.log_std.middleRows(start, len)))};
      const auto t = decompose_minibatch(g, g.constant(RowMatrix(z.middleRows(start, len))), p, N);
      const double wgt = static_cast<double>(len);
      acc.index_code_mi += wgt * t.index_code_mi.item();
      acc.total_correlation += wgt * t.total_correlation.item();
      acc.dimension_kl += wgt * t.dimension_kl.item();
      weight_total += wgt;
    }
    if (model != nullptr) {
      require(windows != nullptr && steps > 0, "recon report needs the windows");
      acc.recon_loglik += recon_loglik(*windows, decode_values(*model, z, steps));
    }
  }
  acc.index_code_mi /= weight_total;
  acc.total_correlation /= weight_total;
  acc.dimension_kl /= weight_total;
  acc.recon_loglik /= static_cast<double>(samples);
  return acc;
}

}  // namespace dts
