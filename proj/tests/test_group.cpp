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

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "dts/errors.hpp"
#include "dts/gradcheck.hpp"
#include "dts/group.hpp"

using namespace dts;

namespace {

RowMatrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed);
  RowMatrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

struct Corpus {
  SeriesDataset source;
  SeriesDataset target;
  SeriesDataset combined;
};

Corpus tiny_corpus(Index per_domain = 12, Index steps = 10) {
  SynthSpec sp;
  sp.steps = steps;
  sp.samples_per_domain = per_domain;
  sp.domains = 2;
  sp.domain_offset = 1.0;
  const SeriesDataset all = normalize(synth_generate(sp)).data;
  Corpus c{all.domain_rows(0), all.domain_rows(1), {}};
  c.combined = adaptation_corpus(c.source, c.target);
  return c;
}

AdaptBatch batch_of(const SeriesDataset& combined, std::vector<Index> rows) {
  AdaptBatch b;
  b.rows = std::move(rows);
  for (Index r : b.rows) {
    b.domains.push_back(combined.domains[r]);
    b.labels.push_back(combined.labels[r]);
  }
  return b;
}

void zero_all(std::vector<Parameter*> ps) {
  for (auto* p : ps) p->zero_grad();
}

std::vector<RowMatrix> grads_of(std::vector<Parameter*> ps) {
  std::vector<RowMatrix> out;
  for (auto* p : ps) out.push_back(p->grad);
  return out;
}

void zero_classifiers(GroupModel& m) {
  for (auto* p : m.classifier_params()) p->value.setZero();
}

}  // namespace

TEST_SUITE("group") {

TEST_CASE("latent splitting") {
  const RowMatrix z = random_matrix(3, 6, 1);
  const auto parts = split_latent(z, LatentSpec::class_domain(4, 2));
  REQUIRE(parts.size() == 2);
  CHECK(parts[0] == z.leftCols(4));
  CHECK(parts[1] == z.rightCols(2));
  CHECK_THROWS_AS(split_latent(z, LatentSpec::single(5)), ContractViolation);

  Graph g;
  const auto t = split_latent(g.constant(z), LatentSpec::class_domain(3, 3));
  CHECK(t[1].shape() == Shape{3, 3});
  CHECK(t[1].value()(0) == z(0, 3));
}

TEST_CASE("group model construction") {
  CHECK_THROWS_AS(GroupModel::init(1, 4, LatentSpec::single(4), 3, 2, 0), ContractViolation);
  CHECK_THROWS_AS(GroupModel::init(1, 4, LatentSpec::class_domain(4, 2), 3, 2, 0), ContractViolation);
  GroupModel m = GroupModel::init(1, 4, LatentSpec::class_domain(3, 3), 3, 2, 0);
  CHECK(m.params().size() == m.core.params().size() + 4);
  CHECK(m.params().back()->name.rfind("domain_head", 0) == 0);
}

TEST_CASE("segment KLs sum to the full closed-form KL") {
  const Corpus c = tiny_corpus();
  GroupModel m = GroupModel::init(1, 6, LatentSpec::class_domain(2, 2), 3, 2, 2);
  Graph g;
  const std::vector<Index> rows{0, 3, 14, 20};
  const ObjectiveConfig obj{ObjectiveMode::Dts, 4.0, 4.0, c.combined.size()};
  const auto t = group_elbo(g, m, c.combined, rows, obj, random_matrix(4, 4, 3));
  REQUIRE(t.segment_kl.size() == 2);
  const Tensor full = mean(sum(kl_diag_gaussian(t.posterior), 1));
  CHECK(t.segment_kl[0].item() + t.segment_kl[1].item() == doctest::Approx(full.item()).epsilon(1e-12));
}

TEST_CASE("untrained heads sit near chance") {
  const Corpus c = tiny_corpus();
  GroupModel m = GroupModel::init(1, 6, LatentSpec::class_domain(2, 2), 3, 2, 4);
  zero_classifiers(m);
  Graph g;
  const auto b = batch_of(c.combined, {0, 1, 12, 13});
  const auto l = adversarial_losses(g, m, g.constant(random_matrix(4, 4, 5)), b, 1.0);
  REQUIRE(l.task_m);
  REQUIRE(l.adv_n);
  CHECK(l.task_m->item() == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(l.adv_n->item() == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(l.task_n.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(l.adv_m.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("target-only batches carry no class terms") {
  const Corpus c = tiny_corpus();
  GroupModel m = GroupModel::init(1, 6, LatentSpec::class_domain(2, 2), 3, 2, 4);
  Graph g;
  const auto b = batch_of(c.combined, {12, 13, 14});
  const auto l = adversarial_losses(g, m, g.constant(random_matrix(3, 4, 6)), b, 1.0);
  CHECK_FALSE(l.task_m.has_value());
  CHECK_FALSE(l.adv_n.has_value());
  CHECK(std::isfinite(l.task_n.item()));
  AdaptBatch bad = batch_of(c.combined, {0, 1});
  bad.labels[0] = kNoLabel;
  Graph g2;
  CHECK_THROWS_AS(adversarial_losses(g2, m, g2.constant(random_matrix(2, 4, 7)), bad, 1.0), ContractViolation);
}

TEST_CASE("reversal matches the explicit two-objective gradient") {
  const Corpus c = tiny_corpus();
  GroupModel m = GroupModel::init(1, 5, LatentSpec::class_domain(2, 2), 3, 2, 8);
  const std::vector<Index> rows{1, 4, 13, 17};
  const auto b = batch_of(c.combined, rows);
  const RowMatrix noise = random_matrix(4, 4, 9);
  const double lambda = 0.7, w = 1.3;
  const ObjectiveConfig obj{ObjectiveMode::Dts, 4.0, 4.0, c.combined.size()};

  zero_all(m.params());
  {
    Graph g;
    const auto e = group_elbo(g, m, c.combined, rows, obj, noise);
    const auto l = adversarial_losses(g, m, e.z, b, lambda);
    g.backward(e.loss + w * *l.task_m + w * l.task_n + l.adv_m + *l.adv_n);
  }
  const auto with_grl = grads_of(m.params());

  // Explicit form: the encoder descends the task terms and ascends the
  // adversarial ones; the classifiers descend both.
  std::vector<Index> src_pos, src_labels;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (b.domains[i] == 0) {
      src_pos.push_back(static_cast<Index>(i));
      src_labels.push_back(b.labels[i]);
    }
  auto adversarial_only = [&](Graph& g, const Tensor& z) {
    const auto seg = split_latent(z, m.latent());
    return cross_entropy(classify(g, m.domain_head, seg[0]), b.domains) +
           cross_entropy(classify(g, m.class_head, gather_rows(seg[1], src_pos)), src_labels);
  };
  zero_all(m.params());
  {
    Graph g;
    const auto e = group_elbo(g, m, c.combined, rows, obj, noise);
    const auto seg = split_latent(e.z, m.latent());
    const Tensor task = cross_entropy(classify(g, m.class_head, gather_rows(seg[0], src_pos)), src_labels) * w +
                        cross_entropy(classify(g, m.domain_head, seg[1]), b.domains) * w;
    g.backward(e.loss + task);
  }
  const auto task_grads = grads_of(m.params());
  zero_all(m.params());
  {
    Graph g;
    const auto e = group_elbo(g, m, c.combined, rows, obj, noise);
    g.backward(adversarial_only(g, e.z));
  }
  const auto adv_grads = grads_of(m.params());

  const std::size_t n_core = m.core.params().size();
  double worst = 0.0;
  for (std::size_t i = 0; i < with_grl.size(); ++i) {
    const double sign = i < n_core ? -lambda : 1.0;
    const RowMatrix expected = task_grads[i] + sign * adv_grads[i];
    worst = std::max(worst, (with_grl[i] - expected).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("group-adversarial loss gradient on a 4-sample batch") {
  const Corpus c = tiny_corpus(6, 8);
  GroupModel m = GroupModel::init(1, 4, LatentSpec::class_domain(2, 2), 3, 2, 10);
  const std::vector<Index> rows{0, 2, 6, 9};
  const auto b = batch_of(c.combined, rows);
  const RowMatrix noise = random_matrix(4, 4, 11);
  const ObjectiveConfig obj{ObjectiveMode::Dts, 4.0, 4.0, c.combined.size()};
  const double lambda = 0.6;
  // Classifier gradients pass through reversal unchanged.
  auto full = [&](Graph& g) {
    const auto e = group_elbo(g, m, c.combined, rows, obj, noise);
    const auto l = adversarial_losses(g, m, e.z, b, lambda);
    return e.loss + *l.task_m + l.task_n + l.adv_m + *l.adv_n;
  };
  CHECK(grad_check(full, m.classifier_params()) < 1e-4);
  // Encoder and decoder see the task terms minus lambda times the adversarial ones.
  auto encoder_view = [&](Graph& g) {
    const auto e = group_elbo(g, m, c.combined, rows, obj, noise);
    const auto l = adversarial_losses(g, m, e.z, b, lambda);
    const auto seg = split_latent(e.z, m.latent());
    std::vector<Index> src_pos{0, 1}, src_labels{b.labels[0], b.labels[1]};
    const Tensor adv = cross_entropy(classify(g, m.domain_head, seg[0]), b.domains) +
                       cross_entropy(classify(g, m.class_head, gather_rows(seg[1], src_pos)), src_labels);
    return e.loss + *l.task_m + l.task_n - lambda * adv;
  };
  CHECK(grad_check(encoder_view, m.core.params()) < 1e-4);
}

TEST_CASE("balanced batches") {
  const BatchPlan plan = balanced_batches(10, 6, 4, CounterRng(3), 0);
  CHECK(plan.size() == 5);
  std::set<Index> seen_src, seen_tgt;
  for (const auto& b : plan) {
    REQUIRE(b.size() == 4);
    Index src = 0;
    for (Index r : b) {
      if (r < 10) {
        ++src;
        seen_src.insert(r);
      } else {
        seen_tgt.insert(r);
      }
    }
    CHECK(src == 2);
  }
  CHECK(seen_src.size() == 10);
  CHECK(seen_tgt.size() == 6);
  CHECK(balanced_batches(10, 6, 4, CounterRng(3), 0) == plan);
  CHECK(balanced_batches(10, 6, 4, CounterRng(3), 1) != plan);
  CHECK_THROWS_AS(balanced_batches(0, 6, 4, CounterRng(3), 0), ContractViolation);
}

TEST_CASE("lambda schedule") {
  GroupHyper h;
  h.lambda = 2.0;
  CHECK(h.lambda_at(0.0) == 2.0);
  h.lambda_warmup = true;
  h.warmup_epochs = 10;
  CHECK(h.lambda_at(0.0) == 0.0);
  CHECK(h.lambda_at(5.0) == doctest::Approx(2.0 * (2.0 / (1.0 + std::exp(-5.0)) - 1.0)));
  CHECK(h.lambda_at(50.0) == doctest::Approx(2.0 * (2.0 / (1.0 + std::exp(-10.0)) - 1.0)));
  h.lambda = -1;
  CHECK_THROWS_AS(h.validate(), ContractViolation);
}

TEST_CASE("adaptation corpus") {
  const Corpus c = tiny_corpus(5, 8);
  CHECK(c.combined.size() == 10);
  CHECK(c.combined.domains[0] == 0);
  CHECK(c.combined.domains[9] == 1);
  CHECK(c.combined.labels[9] == kNoLabel);
  CHECK(c.combined.labels[0] == c.source.labels[0]);
  SeriesDataset unlabeled = c.source;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(adaptation_corpus(unlabeled, c.target), ContractViolation);
}

TEST_CASE("training") {
  const Corpus c = tiny_corpus(16, 10);
  TrainConfig cfg;
  cfg.batch = 8;
  cfg.lr = 1e-2;
  cfg.seed = 12;
  cfg.eval_each_epoch = false;
  const ObjectiveConfig obj{ObjectiveMode::Dts, 4.0, 4.0, 1};

  SUBCASE("zero epochs leave the model unchanged") {
    GroupModel m = GroupModel::init(1, 4, LatentSpec::class_domain(2, 2), 3, 2, 1);
    const GroupModel before = m;
    TrainState st;
    CHECK(adapt_train(m, st, c.source, c.target, obj, cfg, GroupHyper{}, 0).empty());
    auto a = m.params();
    auto b = const_cast<GroupModel&>(before).params();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  }

  SUBCASE("no adversary and silent heads reduce to individual training") {
    GroupModel m = GroupModel::init(1, 4, LatentSpec::class_domain(2, 2), 3, 2, 1);
    zero_classifiers(m);
    VaeModel ref = m.core;
    GroupHyper h;
    h.lambda = 0.0;
    h.freeze_classifiers = true;
    TrainState st, st_ref;
    adapt_train(m, st, c.source, c.target, obj, cfg, h, 3);
    const CounterRng root(cfg.seed);
    const Index ns = c.source.size(), nt = c.target.size();
    BatchPlanFn plan = [&](Index epoch) { return balanced_batches(ns, nt, cfg.batch, root, epoch); };
    ObjectiveConfig obj_ref = obj;
    obj_ref.dataset_size = c.combined.size();
    train_individual(ref, st_ref, c.combined, obj_ref, cfg, 3, {}, plan);
    auto a = m.core.params(), b = ref.params();
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, (a[i]->value - b[i]->value).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-12);
    for (auto* p : m.classifier_params()) CHECK(p->value.isZero());
  }

  SUBCASE("losses are logged per epoch and training is deterministic") {
    auto run = [&] {
      GroupModel m = GroupModel::init(1, 4, LatentSpec::class_domain(2, 2), 3, 2, 5);
      TrainState st;
      auto log = adapt_train(m, st, c.source, c.target, obj, cfg, GroupHyper{}, 2);
      return std::make_pair(log, m.params().front()->value);
    };
    const auto [log, w] = run();
    REQUIRE(log.size() == 2);
    CHECK(log[1].epoch == 2);
    CHECK(std::isfinite(log[1].total));
    CHECK(log[1].task_m > 0.0);
    CHECK(run().second == w);
  }

  SUBCASE("source-only training reports no target terms") {
    GroupModel m = GroupModel::init(1, 4, LatentSpec::class_domain(2, 2), 3, 2, 6);
    TrainState st;
    const auto log = train_source_only(m, st, c.source, obj, cfg, GroupHyper{}, 2);
    CHECK(log.back().task_m > 0.0);
    const auto pred = predict_classes(m, c.source);
    CHECK(pred.size() == static_cast<std::size_t>(c.source.size()));
    const double acc = accuracy(pred, c.source.labels);
    CHECK((acc >= 0.0 && acc <= 1.0));
  }
}

TEST_CASE("accuracy skips unlabeled rows") {
  const std::vector<Index> pred{0, 1, 2, 1}, labels{0, kNoLabel, 2, 0};
  CHECK(accuracy(pred, labels) == doctest::Approx(2.0 / 3.0));
  const std::vector<Index> none{kNoLabel};
  CHECK_THROWS_AS(accuracy(std::vector<Index>{0}, none), ContractViolation);
}

}  // TEST_SUITE
