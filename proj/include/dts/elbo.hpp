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

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dts/nets.hpp"
#include "dts/rng.hpp"
#include "dts/tensor.hpp"

namespace dts {

template <typename Scalar>
inline constexpr Scalar kHalfLog2Pi = Scalar(0.91893853320467274178032973640562);

// ---- closed forms on plain Eigen values ------------------------------------

/// Per-dimension log N(z; mean, exp(log_std)^2) for matching-shape operands.
template <typename DerivedZ, typename DerivedM, typename DerivedS>
auto gaussian_log_density(const Eigen::ArrayBase<DerivedZ>& z, const Eigen::ArrayBase<DerivedM>& mean,
                          const Eigen::ArrayBase<DerivedS>& log_std) {
  using Scalar = typename DerivedZ::Scalar;
  return (-Scalar(0.5) * ((z - mean) * (-log_std).exp()).square() - log_std - kHalfLog2Pi<Scalar>).eval();
}

/// Summed over all dimensions.
template <typename DerivedZ, typename DerivedM, typename DerivedS>
typename DerivedZ::Scalar gaussian_log_density_total(const Eigen::ArrayBase<DerivedZ>& z,
                                                     const Eigen::ArrayBase<DerivedM>& mean,
                                                     const Eigen::ArrayBase<DerivedS>& log_std) {
  return gaussian_log_density(z, mean, log_std).sum();
}

/// KL(N(mean, exp(log_std)^2) || N(0, 1)) per dimension:
/// 0.5 (mean^2 + sigma^2 - 1 - 2 log sigma).
template <typename DerivedM, typename DerivedS>
auto kl_diag_gaussian(const Eigen::ArrayBase<DerivedM>& mean, const Eigen::ArrayBase<DerivedS>& log_std) {
  using Scalar = typename DerivedM::Scalar;
  return (Scalar(0.5) * (mean.square() + (Scalar(2) * log_std).exp() - Scalar(1) - Scalar(2) * log_std)).eval();
}

/// Batch mean of sum_d KL over rows.
inline double mean_closed_form_kl(const PosteriorValues& post) {
  return kl_diag_gaussian(post.mean.array(), post.log_std.array()).rowwise().sum().mean();
}

/// Batch mean of log N(x; x_hat, I) over rows of [B, T*D] matrices.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar recon_loglik(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& x_hat) {
  using Scalar = typename DerivedX::Scalar;
  require(x.rows() == x_hat.rows() && x.cols() == x_hat.cols(), "recon_loglik shape mismatch");
  require(x.rows() > 0, "recon_loglik on an empty batch");
  const Scalar sq = (x - x_hat).squaredNorm() / Scalar(x.rows());
  return -Scalar(0.5) * sq - Scalar(x.cols()) * kHalfLog2Pi<Scalar>;
}

// ---- differentiable versions -------------------------------------------------

/// [B, Z] per-dimension KL to the standard normal.
Tensor kl_diag_gaussian(const GaussianPosterior& post);

/// Scalar batch mean of log N(x; x_hat, I); operands are [T, B, D] or [B, ...]
/// with the batch axis given.
Tensor recon_loglik(const Tensor& x, const Tensor& x_hat, int batch_axis);

/// The three KL components, in nats.
struct DecompositionTerms {
  double index_code_mi = 0.0;
  double total_correlation = 0.0;
  double dimension_kl = 0.0;
  double recon_loglik = 0.0;

  double kl_sum() const { return index_code_mi + total_correlation + dimension_kl; }
};

struct DecompositionTensors {
  Tensor index_code_mi;
  Tensor total_correlation;
  Tensor dimension_kl;
};

/// Minibatch estimates of index-code MI, total correlation and dimension-wise
/// KL from one reparameterized sample per row. The aggregate posterior and its
/// marginals are estimated with stratified importance weights: the row's own
/// posterior gets weight 1/N and each of the other B-1 rows (N-1)/(N(B-1)),
/// which reproduces the exact mixture when B = N.
DecompositionTensors decompose_minibatch(Graph& g, const Tensor& z, const GaussianPosterior& post,
                                         Index dataset_size);

enum class ObjectiveMode { Vanilla, Beta, Dts };

std::string to_string(ObjectiveMode mode);
ObjectiveMode parse_objective_mode(const std::string& s);

struct TermWeights {
  double mi = 1.0;
  double tc = 1.0;
  double dim_kl = 1.0;
};

struct ObjectiveConfig {
  ObjectiveMode mode = ObjectiveMode::Dts;
  double alpha = 4.0;
  double beta = 4.0;
  Index dataset_size = 1;

  /// Throws ContractViolation on invalid values; returns warnings.
  std::vector<std::string> validate() const;
  /// (1, 1, 1) vanilla; (beta, beta, beta) beta; (beta - alpha, beta, beta) dts.
  TermWeights weights() const;
};

/// -recon + w_mi MI + w_tc TC + w_dkl dimKL.
double objective(const ObjectiveConfig& cfg, const DecompositionTerms& terms);
Tensor objective(const ObjectiveConfig& cfg, const DecompositionTensors& terms, const Tensor& recon);

/// Full-dataset term report from detached posteriors: mega-batches of
/// min(N, megabatch) rows, `samples` reparameterized draws each. When a model
/// is given, reconstructions are decoded and recon_loglik is filled in.
DecompositionTerms decompose_dataset(const PosteriorValues& post, Index samples, CounterRng rng,
                                     Index megabatch = 512, VaeModel* model = nullptr,
                                     const RowMatrix* windows = nullptr, Index steps = 0);

}  // namespace dts
