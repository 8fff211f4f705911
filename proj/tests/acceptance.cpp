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

// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dts/checkpoint.hpp"
#include "dts/cli.hpp"
#include "dts/gradcheck.hpp"
#include "dts/group.hpp"
#include "dts/metrics.hpp"
#include "dts/trainer.hpp"

using namespace dts;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], 3);
  return s + "]";
}

RowMatrix normal_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed);
  RowMatrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double log_normal(double z, double mu) { return -0.5 * (z - mu) * (z - mu) - 0.5 * std::log(2.0 * std::numbers::pi); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("dts_acceptance_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& n) const { return (path / n).string(); }
};

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (code != kExitOk) std::cerr << err.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- 1 ------------------------------------------------------------------------------

Outcome decomposition_identity() {
  SynthSpec sp;
  sp.samples_per_domain = 64;
  sp.seed = 1;
  const SeriesDataset ds = normalize(synth_generate(sp)).data;
  VaeModel m = VaeModel::init(1, 16, LatentSpec::single(4), 1);
  TrainState st;
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.batch = 16;
  cfg.eval_each_epoch = false;
  train_individual(m, st, ds, ObjectiveConfig{ObjectiveMode::Vanilla, 0.0, 1.0, ds.size()}, cfg, 30);
  const PosteriorValues post = encode_values(m, ds.windows, ds.steps);
  const double kl = mean_closed_form_kl(post);
  const auto t = decompose_dataset(post, 400, CounterRng(2), 512);
  const double gap = std::abs(t.kl_sum() - kl), tol = 0.05 * std::max(1.0, kl);
  return {gap <= tol, "MI+TC+dimKL=" + fmt(t.kl_sum()) + " closed-form KL=" + fmt(kl) + " |diff|=" + fmt(gap) +
                          " tol=" + fmt(tol)};
}

// ---- 2 ------------------------------------------------------------------------------

Outcome exact_mixture() {
  const double mu[2][2] = {{1.0, 1.0}, {-1.0, -1.0}};
  const Index draws = 1000000;
  // Oracle: sample the explicit two-component aggregate posterior.
  CounterRng rng(3);
  double mi = 0, tc = 0, dkl = 0;
  for (Index s = 0; s < draws; ++s) {
    const int k = static_cast<int>(rng.below(2));
    const double z[2] = {mu[k][0] + rng.normal(), mu[k][1] + rng.normal()};
    const double c0 = log_normal(z[0], mu[0][0]) + log_normal(z[1], mu[0][1]);
    const double c1 = log_normal(z[0], mu[1][0]) + log_normal(z[1], mu[1][1]);
    const double cond = k == 0 ? c0 : c1;
    const double joint = std::log(0.5 * std::exp(c0) + 0.5 * std::exp(c1));
    double prod = 0.0, prior = 0.0;
    for (int d = 0; d < 2; ++d) {
      prod += std::log(0.5 * std::exp(log_normal(z[d], mu[0][d])) + 0.5 * std::exp(log_normal(z[d], mu[1][d])));
      prior += log_normal(z[d], 0.0);
    }
    mi += cond - joint;
    tc += joint - prod;
    dkl += prod - prior;
  }
  mi /= draws;
  tc /= draws;
  dkl /= draws;

  const PosteriorValues post{(RowMatrix(2, 2) << 1, 1, -1, -1).finished(), RowMatrix::Zero(2, 2)};
  const auto est = decompose_dataset(post, draws / 2, CounterRng(4), 512);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  const double worst = std::max({rel(est.index_code_mi, mi), rel(est.total_correlation, tc), rel(est.dimension_kl, dkl)});
  return {worst <= 0.05, "estimator (MI,TC,dimKL)=(" + fmt(est.index_code_mi) + "," + fmt(est.total_correlation) + "," +
                             fmt(est.dimension_kl) + ") mixture=(" + fmt(mi) + "," + fmt(tc) + "," + fmt(dkl) +
                             ") max rel err=" + fmt(worst, 3)};
}

// ---- 3 ------------------------------------------------------------------------------

Outcome gradient_integrity() {
  SynthSpec sp;
  sp.steps = 12;
  sp.samples_per_domain = 8;
  sp.domains = 2;
  sp.domain_offset = 1.0;
  const SeriesDataset all = normalize(synth_generate(sp)).data;
  const SeriesDataset combined = adaptation_corpus(all.domain_rows(0), all.domain_rows(1));
  const std::vector<Index> rows{0, 3, 9, 14};
  const RowMatrix noise = normal_matrix(4, 4, 5);
  const ObjectiveConfig obj{ObjectiveMode::Dts, 4.0, 4.0, combined.size()};

  VaeModel vae = VaeModel::init(1, 6, LatentSpec::single(4), 6);
  const double dts_err =
      grad_check([&](Graph& g) { return elbo_step(g, vae, combined, rows, obj, noise).loss; }, vae.params());

  GroupModel gm = GroupModel::init(1, 6, LatentSpec::class_domain(2, 2), 3, 2, 7);
  AdaptBatch batch;
  batch.rows = rows;
  for (Index r : rows) {
    batch.domains.push_back(combined.domains[r]);
    batch.labels.push_back(combined.labels[r]);
  }
  const double lambda = 0.8;
  auto full = [&](Graph& g) {
    const auto e = group_elbo(g, gm, combined, rows, obj, noise);
    const auto l = adversarial_losses(g, gm, e.z, batch, lambda);
    return e.loss + *l.task_m + l.task_n + l.adv_m + *l.adv_n;
  };
  // Reversal makes the encoder's gradient that of the task terms minus
  // lambda times the adversarial terms; check it against that function.
  auto encoder_objective = [&](Graph& g) {
    const auto e = group_elbo(g, gm, combined, rows, obj, noise);
    const auto l = adversarial_losses(g, gm, e.z, batch, lambda);
    const auto seg = split_latent(e.z, gm.latent());
    std::vector<Index> pos, labels;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (batch.domains[i] == 0) {
        pos.push_back(static_cast<Index>(i));
        labels.push_back(batch.labels[i]);
      }
    const Tensor adv = cross_entropy(classify(g, gm.domain_head, seg[0]), batch.domains) +
                       cross_entropy(classify(g, gm.class_head, gather_rows(seg[1], pos)), labels);
    return e.loss + *l.task_m + l.task_n - lambda * adv;
  };
  const double cls_err = grad_check(full, gm.classifier_params());
  const double enc_err = grad_check(encoder_objective, gm.core.params());
  const double worst = std::max({dts_err, cls_err, enc_err});
  return {worst < 1e-4, "max rel err: dts loss " + fmt(dts_err, 3) + ", group loss classifiers " + fmt(cls_err, 3) +
                            ", group loss encoder/decoder " + fmt(enc_err, 3)};
}

// ---- 4 ------------------------------------------------------------------------------

Outcome grl_exactness() {
  const RowMatrix xv = normal_matrix(3, 5, 8), up = normal_matrix(3, 5, 9);
  const double lambda = 0.37;
  Graph g;
  Tensor x = g.variable(xv);
  const Tensor y = grl(x, lambda);
  const bool identity = (y.value() == x.value()).all();
  g.backward(sum(y * g.constant(up)));
  const Array expected = -lambda * Eigen::Map<const Array>(up.data(), up.size());
  const double back_err = (g.grad(x) - expected).abs().maxCoeff();

  SynthSpec sp;
  sp.steps = 10;
  sp.samples_per_domain = 6;
  sp.domains = 2;
  const SeriesDataset all = normalize(synth_generate(sp)).data;
  const SeriesDataset combined = adaptation_corpus(all.domain_rows(0), all.domain_rows(1));
  GroupModel m = GroupModel::init(1, 4, LatentSpec::class_domain(2, 2), 3, 2, 10);
  const std::vector<Index> rows{0, 2, 7, 10};
  AdaptBatch b;
  b.rows = rows;
  for (Index r : rows) {
    b.domains.push_back(combined.domains[r]);
    b.labels.push_back(combined.labels[r]);
  }
  const RowMatrix noise = normal_matrix(4, 4, 11);
  const ObjectiveConfig obj{ObjectiveMode::Dts, 4.0, 4.0, combined.size()};
  auto grads = [&](const std::function<Tensor(Graph&, const Tensor&, const Tensor&)>& loss) {
    for (auto* p : m.params()) p->zero_grad();
    Graph h;
    const auto e = group_elbo(h, m, combined, rows, obj, noise);
    h.backward(loss(h, e.loss, e.z));
    std::vector<RowMatrix> out;
    for (auto* p : m.params()) out.push_back(p->grad);
    return out;
  };
  std::vector<Index> pos, labels;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (b.domains[i] == 0) {
      pos.push_back(static_cast<Index>(i));
      labels.push_back(b.labels[i]);
    }
  const auto with_grl = grads([&](Graph& h, const Tensor& elbo, const Tensor& z) {
    const auto l = adversarial_losses(h, m, z, b, lambda);
    return elbo + *l.task_m + l.task_n + l.adv_m + *l.adv_n;
  });
  const auto task = grads([&](Graph& h, const Tensor& elbo, const Tensor& z) {
    const auto seg = split_latent(z, m.latent());
    return elbo + cross_entropy(classify(h, m.class_head, gather_rows(seg[0], pos)), labels) +
           cross_entropy(classify(h, m.domain_head, seg[1]), b.domains);
  });
  const auto adv = grads([&](Graph& h, const Tensor&, const Tensor& z) {
    const auto seg = split_latent(z, m.latent());
    return cross_entropy(classify(h, m.domain_head, seg[0]), b.domains) +
           cross_entropy(classify(h, m.class_head, gather_rows(seg[1], pos)), labels);
  });
  const std::size_t n_core = m.core.params().size();
  double eq_err = 0.0;
  for (std::size_t i = 0; i < with_grl.size(); ++i) {
    const RowMatrix expect = task[i] + (i < n_core ? -lambda : 1.0) * adv[i];
    eq_err = std::max(eq_err, (with_grl[i] - expect).cwiseAbs().maxCoeff());
  }
  return {identity && back_err <= 1e-12 && eq_err <= 1e-10,
          std::string("forward identity ") + (identity ? "bitwise" : "BROKEN") + ", backward err " + fmt(back_err, 3) +
              ", GRL vs explicit objective err " + fmt(eq_err, 3)};
}

// ---- 5 ------------------------------------------------------------------------------

Outcome mode_identities() {
  const DecompositionTerms t{0.8137, 0.2291, 1.4413, -71.0625};
  bool ok = true;
  for (double beta : {1.0, 2.5, 4.0, 7.25}) {
    ok &= objective(ObjectiveConfig{ObjectiveMode::Dts, 0.0, beta, 100}, t) ==
          objective(ObjectiveConfig{ObjectiveMode::Beta, 0.0, beta, 100}, t);
  }
  ok &= objective(ObjectiveConfig{ObjectiveMode::Beta, 0.0, 1.0, 100}, t) ==
        objective(ObjectiveConfig{ObjectiveMode::Vanilla, 3.0, 6.0, 100}, t);
  return {ok, "objective(dts, alpha=0) == objective(beta) and objective(beta, beta=1) == objective(vanilla) exactly"};
}

// ---- 6, 7 ---------------------------------------------------------------------------

struct IndividualRun {
  ObjectiveMode mode;
  double alpha;
  double beta;
};

VaeModel train_individual_run(const SeriesDataset& ds, const IndividualRun& r, std::uint64_t seed, Index epochs,
                              Index hidden, double lr) {
  VaeModel m = VaeModel::init(1, hidden, LatentSpec::single(12), seed);
  TrainState st;
  TrainConfig cfg;
  cfg.lr = lr;
  cfg.batch = 64;
  cfg.seed = seed;
  cfg.eval_each_epoch = false;
  train_individual(m, st, ds, ObjectiveConfig{r.mode, r.alpha, r.beta, ds.size()}, cfg, epochs);
  return m;
}

Outcome kl_vanishing() {
  constexpr Index kEpochs = 20;
  std::vector<double> beta_mi, dts_mi;
  bool ratio_ok = true;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    SynthSpec sp;
    sp.samples_per_domain = 2000;
    sp.steps = 128;
    sp.seed = 60 + seed;
    const SeriesDataset ds = normalize(synth_generate(sp)).data;
    for (const auto& run : {IndividualRun{ObjectiveMode::Beta, 0.0, 4.0}, IndividualRun{ObjectiveMode::Dts, 4.0, 4.0}}) {
      VaeModel m = train_individual_run(ds, run, seed, kEpochs, 32, 3e-3);
      const double mi = evaluate_terms(m, ds, 1, seed).index_code_mi;
      (run.mode == ObjectiveMode::Beta ? beta_mi : dts_mi).push_back(mi);
    }
    ratio_ok &= dts_mi.back() >= 2.0 * beta_mi.back() && beta_mi.back() < 0.5;
  }
  return {ratio_ok, "final MI beta(4,0)=" + list(beta_mi) + " dts(4,4)=" + list(dts_mi) + " nats"};
}

Outcome disentanglement_direction() {
  constexpr Index kEpochs = 60;
  std::vector<double> vanilla_mig, dts_mig;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    SynthSpec sp;
    sp.samples_per_domain = 1000;
    sp.steps = 128;
    sp.seed = 100 + seed;
    sp.waveforms = {Waveform::Sine};
    sp.freq_min = sp.freq_max = 2.0;
    sp.phase_max = 0.0;
    sp.slope_min = -3.0;
    sp.slope_max = 3.0;
    const SeriesDataset ds = normalize(synth_generate(sp)).data;
    const auto factors = discretize_factors(*ds.factors, 10);
    for (const auto& run :
         {IndividualRun{ObjectiveMode::Vanilla, 0.0, 1.0}, IndividualRun{ObjectiveMode::Dts, 4.0, 4.0}}) {
      VaeModel m = train_individual_run(ds, run, seed, kEpochs, 32, 3e-3);
      const double score = mig(encode_values(m, ds.windows, ds.steps).mean, factors).score;
      (run.mode == ObjectiveMode::Vanilla ? vanilla_mig : dts_mig).push_back(score);
    }
  }
  const double gain = mean_of(dts_mig) - mean_of(vanilla_mig);
  return {gain >= 0.05, "MIG vanilla=" + list(vanilla_mig) + " dts(4,4)=" + list(dts_mig) + " mean gain " + fmt(gain, 3)};
}

// ---- 8, 9 ---------------------------------------------------------------------------

struct AdaptationResults {
  std::vector<double> source_only_target, adapted_target;
  std::vector<MetricsReport> adapted_reports;
};

AdaptationResults run_adaptation() {
  constexpr Index kEpochs = 100;
  AdaptationResults res;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    SynthSpec sp;
    sp.samples_per_domain = 500;
    sp.steps = 64;
    sp.domains = 2;
    sp.seed = 200 + seed;
    sp.freq_min = sp.freq_max = 2.0;
    sp.slope_min = sp.slope_max = 0.0;
    sp.phase_max = 0.0;
    sp.domain_offset = 1.0;
    sp.domain_freq_scale = 1.5;
    const SeriesDataset raw = synth_generate(sp);
    const SeriesDataset all = normalize(raw, channel_stats(raw.domain_rows(0))).data;
    const SeriesDataset src = all.domain_rows(0), tgt = all.domain_rows(1);
    const ObjectiveConfig obj{ObjectiveMode::Dts, 4.0, 4.0, 1};
    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.batch = 32;
    cfg.seed = seed;
    cfg.eval_each_epoch = false;
    GroupHyper hyper;
    hyper.lambda = 1.0;
    hyper.w_cls = 10.0;
    for (bool adapt : {false, true}) {
      GroupModel m = GroupModel::init(1, 32, LatentSpec::class_domain(4, 4), 3, 2, seed);
      TrainState st;
      if (adapt)
        adapt_train(m, st, src, tgt, obj, cfg, hyper, kEpochs);
      else
        train_source_only(m, st, src, obj, cfg, hyper, kEpochs);
      const double acc = accuracy(predict_classes(m, tgt), tgt.labels);
      (adapt ? res.adapted_target : res.source_only_target).push_back(acc);
      if (adapt) {
        EvalConfig ec;
        ec.seed = seed;
        ec.samples = 1;
        res.adapted_reports.push_back(evaluate(m, all, ec));
      }
    }
  }
  return res;
}

std::optional<AdaptationResults> g_adaptation;

const AdaptationResults& adaptation() {
  if (!g_adaptation) g_adaptation = run_adaptation();
  return *g_adaptation;
}

Outcome adaptation_gain() {
  const auto& r = adaptation();
  const double gain = mean_of(r.adapted_target) - mean_of(r.source_only_target);
  return {gain >= 0.10, "target accuracy source-only=" + list(r.source_only_target) + " adapted=" +
                            list(r.adapted_target) + " mean gain " + fmt(100.0 * gain, 3) + " points"};
}

Outcome discriminability() {
  const auto& r = adaptation();
  std::vector<double> dom_d, dom_y, cls_y, cls_d;
  for (const auto& rep : r.adapted_reports) {
    dom_d.push_back(rep.accuracies.at("domain_z_d"));
    dom_y.push_back(rep.accuracies.at("domain_z_y"));
    cls_y.push_back(rep.accuracies.at("class_z_y"));
    cls_d.push_back(rep.accuracies.at("class_z_d"));
  }
  const double dd = mean_of(dom_d), dy = mean_of(dom_y), gap = mean_of(cls_y) - mean_of(cls_d);
  return {dd >= 0.90 && dy <= 0.65 && gap >= 0.20,
          "probe domain z_d=" + list(dom_d) + " z_y=" + list(dom_y) + "; class z_y=" + list(cls_y) + " z_d=" +
              list(cls_d) + " (mean gap " + fmt(100.0 * gap, 3) + " points)"};
}

// ---- 10 -----------------------------------------------------------------------------

Outcome traversal_artifact() {
  TempDir dir("traversal");
  const std::string data = dir.file("data.csv"), ck = dir.file("ck.json"), seeds = dir.file("seed.csv");
  if (cli({"generate", "--out", data, "--samples", "300", "--seed", "5"}) != kExitOk) return {false, "generate failed"};
  if (cli({"train", "--data", data, "--out", ck, "--epochs", "3", "--hidden", "16", "--latent", "12"}) != kExitOk)
    return {false, "train failed"};
  const std::string csv = slurp(data);
  std::ofstream(seeds) << csv.substr(0, csv.find('\n', csv.find('\n') + 1) + 1);
  std::vector<std::string> args{"traverse", "--ckpt", ck,   "--input", seeds,          "--lo", "-4",
                                "--hi",     "4",      "--steps", "9", "--out", dir.file("a.csv")};
  if (cli(args) != kExitOk) return {false, "traverse failed"};
  args.back() = dir.file("b.csv");
  if (cli(args) != kExitOk) return {false, "second traverse failed"};
  const bool same = slurp(dir.file("a.csv")) == slurp(dir.file("b.csv"));
  std::ifstream in(dir.file("a.csv"));
  std::string line;
  std::getline(in, line);
  std::set<std::pair<std::string, std::string>> series;
  std::set<double> grid;
  while (std::getline(in, line)) {
    std::stringstream s(line);
    std::string id, dim, g;
    std::getline(s, id, ',');
    std::getline(s, dim, ',');
    std::getline(s, g, ',');
    series.insert({dim, g});
    grid.insert(std::stod(g));
  }
  const std::set<double> want{-4, -3, -2, -1, 0, 1, 2, 3, 4};
  const bool ok = same && series.size() == 108 && grid == want;
  return {ok, std::to_string(series.size()) + " series, grid " + (grid == want ? "{-4,...,4}" : "WRONG") +
                  ", repeated invocation " + (same ? "identical" : "DIFFERENT")};
}

// ---- 11 -----------------------------------------------------------------------------

Outcome reproducibility() {
  TempDir dir("repro");
  const std::string data = dir.file("data.csv");
  if (cli({"generate", "--out", data, "--samples", "200", "--seed", "6"}) != kExitOk) return {false, "generate failed"};
  const std::vector<std::string> base{"--data", data, "--hidden", "16", "--latent", "6", "--batch", "32"};
  auto train = [&](std::vector<std::string> extra) {
    std::vector<std::string> a{"train"};
    a.insert(a.end(), base.begin(), base.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a);
  };
  if (train({"--out", dir.file("ten.json"), "--epochs", "10"}) != kExitOk) return {false, "train(10) failed"};
  if (train({"--out", dir.file("five.json"), "--epochs", "5"}) != kExitOk) return {false, "train(5) failed"};
  if (cli({"train", "--resume", dir.file("five.json"), "--data", data, "--out", dir.file("again.json"), "--epochs",
           "5"}) != kExitOk)
    return {false, "resume failed"};
  const Checkpoint ten = load_checkpoint(dir.file("ten.json")), again = load_checkpoint(dir.file("again.json"));
  bool resume_equal = ten.params.size() == again.params.size() && again.state.epoch == 10;
  for (std::size_t i = 0; resume_equal && i < ten.params.size(); ++i)
    resume_equal = ten.params[i].value == again.params[i].value;

  save_checkpoint(ten, dir.file("copy.json"));
  const Checkpoint copy = load_checkpoint(dir.file("copy.json"));
  bool round_trip = copy.params.size() == ten.params.size();
  for (std::size_t i = 0; round_trip && i < ten.params.size(); ++i)
    round_trip = copy.params[i].value == ten.params[i].value && copy.params[i].name == ten.params[i].name;
  round_trip = round_trip && checkpoint_to_json(copy) == checkpoint_to_json(ten);
  return {resume_equal && round_trip, std::string("save/load ") + (round_trip ? "bitwise" : "DIFFERS") +
                                          ", resume(5)+5 vs train(10) " + (resume_equal ? "bitwise" : "DIFFERS")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0: no limit
  Outcome (*check)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "decomposition identity", 60, decomposition_identity},
      {2, "estimator vs exact mixture", 120, exact_mixture},
      {3, "gradient integrity", 60, gradient_integrity},
      {4, "GRL exactness", 0, grl_exactness},
      {5, "objective-mode identities", 0, mode_identities},
      {6, "KL vanishing", 900, kl_vanishing},
      {7, "disentanglement direction", 900, disentanglement_direction},
      {8, "adaptation gain", 1200, adaptation_gain},
      {9, "discriminability ablation", 0, discriminability},
      {10, "traversal artifact", 0, traversal_artifact},
      {11, "reproducibility plumbing", 0, reproducibility},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    std::string timing = fmt(secs, 3) + " s";
    if (c.budget_seconds > 0) {
      timing += " of " + fmt(c.budget_seconds, 4) + " s";
      if (secs > c.budget_seconds) {
        o.pass = false;
        timing += ", over budget";
      }
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " (" << timing
              << ")" << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
