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

#include <cstdint>
#include <functional>
#include <vector>

#include "dts/data.hpp"
#include "dts/elbo.hpp"
#include "dts/nets.hpp"
#include "dts/optim.hpp"

namespace dts {

struct TrainConfig {
  double lr = 1e-3;
  Index batch = 64;
  std::uint64_t seed = 0;
  /// Global gradient-norm clip applied before every update; <= 0 disables.
  double clip = 5.0;
  /// Reparameterized draws for the per-epoch full-dataset report.
  Index log_samples = 1;
  bool eval_each_epoch = true;
};

/// Optimizer state and epoch counter; everything a resumed run needs besides
/// the parameters and the seed.
struct TrainState {
  AdamState adam;
  Index epoch = 0;
};

struct EpochLog {
  Index epoch = 0;
  /// Mean training loss over the epoch's minibatches.
  double batch_loss = 0.0;
  DecompositionTerms batch_terms;
  /// Full-dataset evaluation (when enabled).
  double loss = 0.0;
  DecompositionTerms terms;
};

using ProgressFn = std::function<void(const EpochLog&)>;
/// Row indices of every minibatch of one epoch.
using BatchPlan = std::vector<std::vector<Index>>;
using BatchPlanFn = std::function<BatchPlan(Index epoch)>;

/// Shuffled near-equal minibatches of at least `batch` rows (a single batch
/// when n < 2 * batch).
BatchPlan shuffled_batches(Index n, Index batch, const CounterRng& root, Index epoch);

/// Standard-normal [rows, cols] draws for one (epoch, batch) step.
RowMatrix step_noise(const CounterRng& root, Index epoch, Index batch_index, Index rows, Index cols);

/// Loss of one minibatch under `obj`, recorded on `g`.
struct StepTerms {
  Tensor loss;
  Tensor recon;
  DecompositionTensors terms;
  GaussianPosterior posterior;
  Tensor z;
};
StepTerms elbo_step(Graph& g, VaeModel& model, const SeriesDataset& ds, std::span<const Index> rows,
                    const ObjectiveConfig& obj, const RowMatrix& noise);

/// Adam-optimizes `model` in place for `epochs` more epochs, continuing from
/// `state`. On a numeric failure or divergence the parameters and state are
/// restored to the last completed epoch and NumericFailure is rethrown.
std::vector<EpochLog> train_individual(VaeModel& model, TrainState& state, const SeriesDataset& ds,
                                       const ObjectiveConfig& obj, const TrainConfig& cfg, Index epochs,
                                       const ProgressFn& progress = {}, const BatchPlanFn& plan = {});

/// Full-dataset decomposition report and its objective value.
DecompositionTerms evaluate_terms(VaeModel& model, const SeriesDataset& ds, Index samples, std::uint64_t seed);

}  // namespace dts
