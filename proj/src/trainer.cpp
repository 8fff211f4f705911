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

#include "dts/trainer.hpp"

#include <algorithm>
#include <numeric>

namespace dts {

namespace {

constexpr double kDivergenceLimit = 1e6;
constexpr std::uint64_t kShuffleTag = 11;
constexpr std::uint64_t kNoiseTag = 12;
constexpr std::uint64_t kEvalTag = 13;

std::vector<RowMatrix> snapshot(const std::vector<Parameter*>& ps) {
  std::vector<RowMatrix> out;
  for (auto* p : ps) out.push_back(p->value);
  return out;
}

void restore(const std::vector<Parameter*>& ps, const std::vector<RowMatrix>& values) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = values[i];
}

}  // namespace

BatchPlan shuffled_batches(Index n, Index batch, const CounterRng& root, Index epoch) {
  require(batch >= 2, "batch size must be >= 2");
  require(n >= 2, "training needs at least 2 windows");
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  CounterRng rng = root.split({kShuffleTag, static_cast<std::uint64_t>(epoch)});
  shuffle_in_place(order, rng);
  const Index count = std::max<Index>(1, n / batch);
  BatchPlan plan;
  for (Index b = 0; b < count; ++b) {
    const Index lo = b * n / count, hi = (b + 1) * n / count;
    plan.emplace_back(order.begin() + lo, order.begin() + hi);
  }
  return plan;
}

RowMatrix step_noise(const CounterRng& root, Index epoch, Index batch_index, Index rows, Index cols) {
  CounterRng rng =
      root.split({kNoiseTag, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch_index)});
  RowMatrix noise(rows, cols);
  for (Index k = 0; k < noise.size(); ++k) noise.data()[k] = rng.normal();
  return noise;
}

StepTerms elbo_step(Graph& g, VaeModel& model, const SeriesDataset& ds, std::span<const Index> rows,
                    const ObjectiveConfig& obj, const RowMatrix& noise) {
  StepTerms s;
  const Tensor x = time_major_batch(g, ds.windows, rows, ds.steps, ds.channels);
  s.posterior = encode(g, model.encoder, x);
  s.z = reparameterize(g, s.posterior, noise);
  const Tensor x_hat = decode(g, model.decoder, s.z, ds.steps);
  s.recon = recon_loglik(x, x_hat, 1);
  s.terms = decompose_minibatch(g, s.z, s.posterior, obj.dataset_size);
  s.loss = objective(obj, s.terms, s.recon);
  return s;
}

DecompositionTerms evaluate_terms(VaeModel& model, const SeriesDataset& ds, Index samples, std::uint64_t seed) {
  const PosteriorValues post = encode_values(model, ds.windows, ds.steps);
  return decompose_dataset(post, samples, CounterRng(seed).split({kEvalTag}), 512, &model, &ds.windows, ds.steps);
}

std::vector<EpochLog> train_individual(VaeModel& model, TrainState& state, const SeriesDataset& ds,
                                       const ObjectiveConfig& obj_in, const TrainConfig& cfg, Index epochs,
                                       const ProgressFn& progress, const BatchPlanFn& plan) {
  require(epochs >= 0, "epochs must be >= 0");
  require(ds.channels == model.channels, "dataset channels do not match the model");
  ds.validate();
  ObjectiveConfig obj = obj_in;
  obj.dataset_size = ds.size();
  obj.validate();

  const CounterRng root(cfg.seed);
  const auto params = model.params();
  state.adam.hyper.lr = cfg.lr;
  std::vector<EpochLog> history;

  for (Index e = 0; e < epochs; ++e) {
    const Index epoch = state.epoch;
    const auto good_params = snapshot(params);
    const TrainState good_state = state;
    try {
      const BatchPlan batches = plan ? plan(epoch) : shuffled_batches(ds.size(), cfg.batch, root, epoch);
      EpochLog log;
      log.epoch = epoch + 1;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto& rows = batches[b];
        const RowMatrix noise =
            step_noise(root, epoch, static_cast<Index>(b), static_cast<Index>(rows.size()), model.latent().total());
        zero_grads(params);
        Graph g;
        const StepTerms s = elbo_step(g, model, ds, rows, obj, noise);
        const double loss = s.loss.item();
        if (loss > kDivergenceLimit) {
          throw NumericFailure("training diverged at epoch " + std::to_string(epoch + 1) + " (loss " +
                               std::to_string(loss) + ")");
        }
        log.batch_loss += loss;
        log.batch_terms.index_code_mi += s.terms.index_code_mi.item();
        log.batch_terms.total_correlation += s.terms.total_correlation.item();
        log.batch_terms.dimension_kl += s.terms.dimension_kl.item();
        log.batch_terms.recon_loglik += s.recon.item();
        g.backward(s.loss);
        clip_grad_norm(params, cfg.clip);
        adam_step(params, state.adam);
      }
      const double nb = static_cast<double>(batches.size());
      log.batch_loss /= nb;
      log.batch_terms.index_code_mi /= nb;
      log.batch_terms.total_correlation /= nb;
      log.batch_terms.dimension_kl /= nb;
      log.batch_terms.recon_loglik /= nb;
      if (cfg.eval_each_epoch) {
        log.terms = evaluate_terms(model, ds, cfg.log_samples, cfg.seed ^ static_cast<std::uint64_t>(epoch));
        log.loss = objective(obj, log.terms);
      } else {
        log.terms = log.batch_terms;
        log.loss = log.batch_loss;
      }
      ++state.epoch;
      history.push_back(log);
      if (progress) progress(log);
    } catch (const NumericFailure& err) {
      restore(params, good_params);
      state = good_state;
      throw NumericFailure(std::string(err.what()) + "; parameters restored to epoch " + std::to_string(epoch));
    }
  }
  return history;
}

}  // namespace dts
