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

#include <optional>
#include <vector>

#include "dts/data.hpp"
#include "dts/elbo.hpp"
#include "dts/nets.hpp"
#include "dts/trainer.hpp"

namespace dts {

/// Segment tensors in spec order; concatenating them reproduces z.
std::vector<Tensor> split_latent(const Tensor& z, const LatentSpec& spec);
std::vector<RowMatrix> split_latent(const RowMatrix& z, const LatentSpec& spec);

/// Shared trunk with per-segment heads (inside `core`), a decoder over the
/// concatenated latent, a class classifier on the first segment (z_y) and a
/// domain classifier on the second (z_d).
struct GroupModel {
  VaeModel core;
  ClassifierParams class_head;
  ClassifierParams domain_head;

  static GroupModel init(Index channels, Index hidden, const LatentSpec& latent, Index classes, Index domains,
                         std::uint64_t seed);
  const LatentSpec& latent() const { return core.latent(); }
  std::vector<Parameter*> params();
  std::vector<Parameter*> classifier_params();
};

struct GroupHyper {
  double lambda = 1.0;
  /// Ramp lambda by 2 / (1 + exp(-10 p)) - 1 over the first warmup_epochs.
  bool lambda_warmup = false;
  double warmup_epochs = 10.0;
  double w_cls = 1.0;
  /// Keep classifier weights fixed (excluded from the optimizer).
  bool freeze_classifiers = false;

  void validate() const;
  double lambda_at(double progress_epochs) const;
};

/// Rows of one adaptation minibatch (indices into the combined
/// source-then-target dataset).
struct AdaptBatch {
  std::vector<Index> rows;
  std::vector<Index> domains;
  /// kNoLabel for target rows.
  std::vector<Index> labels;
};

struct GroupElboTerms {
  /// Batch mean of the closed-form KL of each segment.
  std::vector<Tensor> segment_kl;
  Tensor recon;
  DecompositionTensors terms;
  Tensor loss;
  GaussianPosterior posterior;
  Tensor z;
};

/// Per-segment KLs, joint reconstruction, and the decomposed objective on the
/// concatenated latent.
GroupElboTerms group_elbo(Graph& g, GroupModel& model, const SeriesDataset& combined, std::span<const Index> rows,
                          const ObjectiveConfig& obj, const RowMatrix& noise);

struct AdversarialLosses {
  /// C_m on z_y against class labels (source rows); absent without source rows.
  std::optional<Tensor> task_m;
  /// C_n on z_d against domain labels (all rows).
  Tensor task_n;
  /// C_n on GRL(z_y) against domain labels (all rows).
  Tensor adv_m;
  /// C_m on GRL(z_d) against class labels (source rows); absent without source rows.
  std::optional<Tensor> adv_n;
};

AdversarialLosses adversarial_losses(Graph& g, GroupModel& model, const Tensor& z, const AdaptBatch& batch,
                                     double lambda);

struct AdaptEpochLog {
  Index epoch = 0;
  double elbo_loss = 0.0;
  double task_m = 0.0;
  double task_n = 0.0;
  double adv_m = 0.0;
  double adv_n = 0.0;
  double total = 0.0;
  DecompositionTerms terms;
};

using AdaptProgressFn = std::function<void(const AdaptEpochLog&)>;

/// Half source, half target rows per batch, interleaved; the smaller domain
/// cycles. Indices refer to source rows [0, ns) followed by target rows.
BatchPlan balanced_batches(Index source_n, Index target_n, Index batch, const CounterRng& root, Index epoch);

/// Source rows tagged domain 0 with labels, target rows domain 1 unlabeled.
SeriesDataset adaptation_corpus(const SeriesDataset& source, const SeriesDataset& target);

/// One optimizer over encoder, decoder and both classifiers; each step
/// minimizes group ELBO + w_cls (task_m + task_n) + adv_m + adv_n, with the
/// GRL carrying -lambda into the encoder.
std::vector<AdaptEpochLog> adapt_train(GroupModel& model, TrainState& state, const SeriesDataset& source,
                                       const SeriesDataset& target, const ObjectiveConfig& obj,
                                       const TrainConfig& cfg, const GroupHyper& hyper, Index epochs,
                                       const AdaptProgressFn& progress = {});

/// Baseline without target data: group ELBO + w_cls task_m on source rows.
std::vector<AdaptEpochLog> train_source_only(GroupModel& model, TrainState& state, const SeriesDataset& source,
                                             const ObjectiveConfig& obj, const TrainConfig& cfg,
                                             const GroupHyper& hyper, Index epochs,
                                             const AdaptProgressFn& progress = {});

/// argmax of C_m on the posterior mean of z_y.
std::vector<Index> predict_classes(GroupModel& model, const SeriesDataset& ds);

/// Fraction of rows whose prediction equals the label (unlabeled rows skipped).
double accuracy(std::span<const Index> predicted, std::span<const Index> labels);

}  // namespace dts
