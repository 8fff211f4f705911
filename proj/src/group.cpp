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

#include "dts/group.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dts {

namespace {

constexpr double kDivergenceLimit = 1e6;
constexpr std::uint64_t kBalancedTag = 21;

}  // namespace

std::vector<Tensor> split_latent(const Tensor& z, const LatentSpec& spec) {
  require(z.shape().size() == 2 && z.dim(1) == spec.total(),
          "latent width " + std::to_string(z.shape().size() == 2 ? z.dim(1) : -1) + " does not match spec total " +
              std::to_string(spec.total()));
  if (spec.segments.size() == 1) return {z};
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < spec.segments.size(); ++i)
    out.push_back(slice(z, 1, spec.offset(i), spec.segments[i].size));
  return out;
}

std::vector<RowMatrix> split_latent(const RowMatrix& z, const LatentSpec& spec) {
  require(z.cols() == spec.total(), "latent width " + std::to_string(z.cols()) + " does not match spec total " +
                                        std::to_string(spec.total()));
  std::vector<RowMatrix> out;
  for (std::size_t i = 0; i < spec.segments.size(); ++i)
    out.emplace_back(z.middleCols(spec.offset(i), spec.segments[i].size));
  return out;
}

// ---- model --------------------------------------------------------------------

GroupModel GroupModel::init(Index channels, Index hidden, const LatentSpec& latent, Index classes, Index domains,
                            std::uint64_t seed) {
  latent.validate();
  require(latent.segments.size() == 2, "group model needs exactly two latent segments (z_y, z_d)");
  require(latent.segments[0].size == latent.segments[1].size,
          "group model segments must have equal sizes (each classifier is also applied to the other segment)");
  GroupModel m;
  m.core = VaeModel::init(channels, hidden, latent, seed);
  CounterRng root(seed);
  CounterRng crng = root.split({103}), drng = root.split({104});
  m.class_head = ClassifierParams::init(latent.segments[0].size, classes, crng, "class_head");
  m.domain_head = ClassifierParams::init(latent.segments[1].size, domains, drng, "domain_head");
  return m;
}

std::vector<Parameter*> GroupModel::params() {
  auto out = core.params();
  for (auto* p : classifier_params()) out.push_back(p);
  return out;
}

std::vector<Parameter*> GroupModel::classifier_params() {
  auto out = class_head.params();
  for (auto* p : domain_head.params()) out.push_back(p);
  return out;
}

void GroupHyper::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, "train.lambda must be >= 0");
  require(std::isfinite(w_cls) && w_cls >= 0.0, "train.w_cls must be >= 0");
  require(!lambda_warmup || warmup_epochs > 0.0, "lambda warm-up needs a positive horizon");
}

double GroupHyper::lambda_at(double progress_epochs) const {
  if (!lambda_warmup) return lambda;
  const double p = std::clamp(progress_epochs / warmup_epochs, 0.0, 1.0);
  return lambda * (2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0);
}

// ---- losses -------------------------------------------------------------------

GroupElboTerms group_elbo(Graph& g, GroupModel& model, const SeriesDataset& combined, std::span<const Index> rows,
                          const ObjectiveConfig& obj, const RowMatrix& noise) {
  require(!rows.empty(), "group_elbo on an empty batch");
  const StepTerms s = elbo_step(g, model.core, combined, rows, obj, noise);
  GroupElboTerms out;
  out.recon = s.recon;
  out.terms = s.terms;
  out.loss = s.loss;
  out.posterior = s.posterior;
  out.z = s.z;
  const auto means = split_latent(s.posterior.mean, model.latent());
  const auto log_stds = split_latent(s.posterior.log_std, model.latent());
  for (std::size_t i = 0; i < means.size(); ++i) {
    const Tensor kl = kl_diag_gaussian(GaussianPosterior{means[i], log_stds[i]});
    out.segment_kl.push_back(mean(sum(kl, 1)));
  }
  return out;
}

AdversarialLosses adversarial_losses(Graph& g, GroupModel& model, const Tensor& z, const AdaptBatch& batch,
                                     double lambda) {
  const auto seg = split_latent(z, model.latent());
  const Tensor& z_y = seg[0];
  const Tensor& z_d = seg[1];
  require(static_cast<Index>(batch.rows.size()) == z.dim(0) && batch.domains.size() == batch.rows.size() &&
              batch.labels.size() == batch.rows.size(),
          "adaptation batch columns not aligned with z");
  std::vector<Index> source_pos, source_labels;
  for (std::size_t i = 0; i < batch.rows.size(); ++i) {
    if (batch.domains[i] == 0) {
      require(batch.labels[i] != kNoLabel, "source row without a class label");
      source_pos.push_back(static_cast<Index>(i));
      source_labels.push_back(batch.labels[i]);
    }
  }
  AdversarialLosses out;
  out.task_n = cross_entropy(classify(g, model.domain_head, z_d), batch.domains);
  out.adv_m = cross_entropy(classify(g, model.domain_head, grl(z_y, lambda)), batch.domains);
  if (!source_pos.empty()) {
    out.task_m = cross_entropy(classify(g, model.class_head, gather_rows(z_y, source_pos)), source_labels);
    out.adv_n = cross_entropy(classify(g, model.class_head, grl(gather_rows(z_d, source_pos), lambda)),
                              source_labels);
  }
  return out;
}

// ---- training -----------------------------------------------------------------

BatchPlan balanced_batches(Index source_n, Index target_n, Index batch, const CounterRng& root, Index epoch) {
  require(source_n >= 1 && target_n >= 1, "adaptation needs source and target rows");
  require(batch >= 2, "batch size must be >= 2");
  const Index half = std::max<Index>(1, batch / 2);
  std::vector<Index> src(source_n), tgt(target_n);
  std::iota(src.begin(), src.end(), Index{0});
  std::iota(tgt.begin(), tgt.end(), source_n);
  CounterRng rng = root.split({kBalancedTag, static_cast<std::uint64_t>(epoch)});
  shuffle_in_place(src, rng);
  shuffle_in_place(tgt, rng);
  const Index count = std::max<Index>(1, std::max(source_n, target_n) / half);
  BatchPlan plan(count);
  for (Index b = 0; b < count; ++b) {
    for (Index k = 0; k < half; ++k) {
      plan[b].push_back(src[(b * half + k) % source_n]);
      plan[b].push_back(tgt[(b * half + k) % target_n]);
    }
  }
  return plan;
}

SeriesDataset adaptation_corpus(const SeriesDataset& source, const SeriesDataset& target) {
  require(source.size() > 0 && target.size() > 0, "adaptation needs nonempty source and target sets");
  require(source.has_labels(), "source set has no class labels");
  for (Index l : source.labels) require(l != kNoLabel, "every source row needs a class label");
  SeriesDataset s = source, t = target;
  s.domains.assign(s.size(), 0);
  t.domains.assign(t.size(), 1);
  t.labels.assign(t.size(), kNoLabel);
  s.factors.reset();
  t.factors.reset();
  SeriesDataset out = concat(s, t);
  out.validate();
  return out;
}

namespace {

struct GroupRun {
  GroupModel& model;
  TrainState& state;
  const SeriesDataset& data;
  Index source_n;
  bool with_target;
  ObjectiveConfig obj;
  const TrainConfig& cfg;
  const GroupHyper& hyper;
};

std::vector<AdaptEpochLog> run_group_training(GroupRun run, Index epochs, const AdaptProgressFn& progress) {
  require(epochs >= 0, "epochs must be >= 0");
  run.hyper.validate();
  run.obj.dataset_size = run.data.size();
  run.obj.validate();
  require(run.data.channels == run.model.core.channels, "dataset channels do not match the model");
  require(run.data.label_cardinality() <= run.model.class_head.classes(),
          "source labels exceed the class head's cardinality");

  const CounterRng root(run.cfg.seed);
  std::vector<Parameter*> params = run.hyper.freeze_classifiers ? run.model.core.params() : run.model.params();
  run.state.adam.hyper.lr = run.cfg.lr;
  std::vector<AdaptEpochLog> history;
  const Index Z = run.model.latent().total();

  for (Index e = 0; e < epochs; ++e) {
    const Index epoch = run.state.epoch;
    std::vector<RowMatrix> good;
    for (auto* p : params) good.push_back(p->value);
    const TrainState good_state = run.state;
    try {
      const BatchPlan plan =
          run.with_target
              ? balanced_batches(run.source_n, run.data.size() - run.source_n, run.cfg.batch, root, epoch)
              : shuffled_batches(run.source_n, run.cfg.batch, root, epoch);
      AdaptEpochLog log;
      log.epoch = epoch + 1;
      for (std::size_t b = 0; b < plan.size(); ++b) {
        AdaptBatch batch;
        batch.rows = plan[b];
        for (Index r : batch.rows) {
          batch.domains.push_back(run.data.domains[r]);
          batch.labels.push_back(run.data.labels[r]);
        }
        const RowMatrix noise =
            step_noise(root, epoch, static_cast<Index>(b), static_cast<Index>(batch.rows.size()), Z);
        const double lambda =
            run.hyper.lambda_at(static_cast<double>(epoch) + static_cast<double>(b) / static_cast<double>(plan.size()));
        zero_grads(params);
        Graph g;
        const GroupElboTerms elbo = group_elbo(g, run.model, run.data, batch.rows, run.obj, noise);
        const AdversarialLosses adv = adversarial_losses(g, run.model, elbo.z, batch, lambda);
        Tensor loss = elbo.loss;
        if (adv.task_m) loss = loss + run.hyper.w_cls * *adv.task_m;
        if (run.with_target) {
          loss = loss + run.hyper.w_cls * adv.task_n + adv.adv_m;
          if (adv.adv_n) loss = loss + *adv.adv_n;
        }
        const double total = loss.item();
        if (!(total < kDivergenceLimit)) {
          throw NumericFailure("adaptation diverged at epoch " + std::to_string(epoch + 1) + " (loss " +
                               std::to_string(total) + ")");
        }
        log.elbo_loss += elbo.loss.item();
        log.task_m += adv.task_m ? adv.task_m->item() : 0.0;
        log.task_n += adv.task_n.item();
        log.adv_m += adv.adv_m.item();
        log.adv_n += adv.adv_n ? adv.adv_n->item() : 0.0;
        log.total += total;
        log.terms.index_code_mi += elbo.terms.index_code_mi.item();
        log.terms.total_correlation += elbo.terms.total_correlation.item();
        log.terms.dimension_kl += elbo.terms.dimension_kl.item();
        log.terms.recon_loglik += elbo.recon.item();
        g.backward(loss);
        clip_grad_norm(params, run.cfg.clip);
        adam_step(params, run.state.adam);
      }
      const double nb = static_cast<double>(plan.size());
      for (double* v : {&log.elbo_loss, &log.task_m, &log.task_n, &log.adv_m, &log.adv_n, &log.total,
                        &log.terms.index_code_mi, &log.terms.total_correlation, &log.terms.dimension_kl,
                        &log.terms.recon_loglik})
        *v /= nb;
      ++run.state.epoch;
      history.push_back(log);
      if (progress) progress(log);
    } catch (const NumericFailure& err) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = good[i];
      run.state = good_state;
      throw NumericFailure(std::string(err.what()) + "; parameters restored to epoch " + std::to_string(epoch));
    }
  }
  return history;
}

}  // namespace

std::vector<AdaptEpochLog> adapt_train(GroupModel& model, TrainState& state, const SeriesDataset& source,
                                       const SeriesDataset& target, const ObjectiveConfig& obj,
                                       const TrainConfig& cfg, const GroupHyper& hyper, Index epochs,
                                       const AdaptProgressFn& progress) {
  const SeriesDataset data = adaptation_corpus(source, target);
  return run_group_training({model, state, data, source.size(), true, obj, cfg, hyper}, epochs, progress);
}

std::vector<AdaptEpochLog> train_source_only(GroupModel& model, TrainState& state, const SeriesDataset& source,
                                             const ObjectiveConfig& obj, const TrainConfig& cfg,
                                             const GroupHyper& hyper, Index epochs, const AdaptProgressFn& progress) {
  require(source.has_labels(), "source set has no class labels");
  SeriesDataset data = source;
  data.domains.assign(data.size(), 0);
  data.factors.reset();
  return run_group_training({model, state, data, data.size(), false, obj, cfg, hyper}, epochs, progress);
}

std::vector<Index> predict_classes(GroupModel& model, const SeriesDataset& ds) {
  const PosteriorValues post = encode_values(model.core, ds.windows, ds.steps);
  const RowMatrix z_y = split_latent(post.mean, model.latent())[0];
  const RowMatrix logits =
      (z_y * model.class_head.layer.weight.value).rowwise() + model.class_head.layer.bias.value.row(0);
  std::vector<Index> out(logits.rows());
  for (Index r = 0; r < logits.rows(); ++r) logits.row(r).maxCoeff(&out[r]);
  return out;
}

double accuracy(std::span<const Index> predicted, std::span<const Index> labels) {
  require(predicted.size() == labels.size(), "accuracy: prediction/label counts differ");
  Index hits = 0, total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoLabel) continue;
    ++total;
    hits += predicted[i] == labels[i];
  }
  require(total > 0, "accuracy needs at least one labeled row");
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace dts
