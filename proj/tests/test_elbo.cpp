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
#include <numbers>
#include <numeric>
#include <vector>

#include "dts/data.hpp"
#include "dts/elbo.hpp"
#include "dts/errors.hpp"
#include "dts/gradcheck.hpp"
#include "dts/trainer.hpp"

using namespace dts;

namespace {

const double kLn2Pi = std::log(2.0 * std::numbers::pi);

double normal_logpdf(double z, double mu, double sigma) {
  const double u = (z - mu) / sigma;
  return -0.5 * u * u - std::log(sigma) - 0.5 * kLn2Pi;
}

RowMatrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed);
  RowMatrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

DecompositionTerms terms_of(const RowMatrix& z, const PosteriorValues& post, Index n) {
  Graph g(false);
  const auto t = decompose_minibatch(g, g.constant(z), {g.constant(post.mean), g.constant(post.log_std)}, n);
  return {t.index_code_mi.item(), t.total_correlation.item(), t.dimension_kl.item(), 0.0};
}

/// Exact-mixture Monte Carlo for a two-component equal-weight aggregate
/// posterior with identity covariances in 2-D.
DecompositionTerms mixture_oracle(const double mu[2][2], int draws, std::uint64_t seed) {
  CounterRng rng(seed);
  double mi = 0, tc = 0, dkl = 0;
  for (int s = 0; s < draws; ++s) {
    const int k = static_cast<int>(rng.below(2));
    const double z[2] = {mu[k][0] + rng.normal(), mu[k][1] + rng.normal()};
    const double lq_cond = normal_logpdf(z[0], mu[k][0], 1) + normal_logpdf(z[1], mu[k][1], 1);
    const double c0 = normal_logpdf(z[0], mu[0][0], 1) + normal_logpdf(z[1], mu[0][1], 1);
    const double c1 = normal_logpdf(z[0], mu[1][0], 1) + normal_logpdf(z[1], mu[1][1], 1);
    const double lq = std::log(0.5 * std::exp(c0) + 0.5 * std::exp(c1));
    double lprod = 0.0, lp = 0.0;
    for (int d = 0; d < 2; ++d) {
      lprod += std::log(0.5 * std::exp(normal_logpdf(z[d], mu[0][d], 1)) + 0.5 * std::exp(normal_logpdf(z[d], mu[1][d], 1)));
      lp += normal_logpdf(z[d], 0, 1);
    }
    mi += lq_cond - lq;
    tc += lq - lprod;
    dkl += lprod - lp;
  }
  return {mi / draws, tc / draws, dkl / draws, 0.0};
}

}  // namespace

TEST_SUITE("elbo") {

TEST_CASE("gaussian log density") {
  const Eigen::Array<double, 1, 1> z0(0.0), m0(0.0), s0(0.0);
  CHECK(gaussian_log_density_total(z0, m0, s0) == doctest::Approx(-0.5 * kLn2Pi).epsilon(1e-15));

  Eigen::Array3d z(0.7, -0.2, 1.3), ls(0.1, -0.4, 0.25);
  CHECK(gaussian_log_density_total(z, z, ls) == doctest::Approx(-ls.sum() - 1.5 * kLn2Pi));
  CHECK(gaussian_log_density_total(z, z + 5.0, ls) < gaussian_log_density_total(z, z, ls));

  // Trapezoid quadrature of a random 3-D density over +-10 sigma.
  const Eigen::Array3d mean(0.3, -1.2, 0.8), log_std(-0.3, 0.2, 0.5);
  const int n = 121;
  double total = 0.0;
  Eigen::Array3d lo = mean - 10 * log_std.exp(), step = 20 * log_std.exp() / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Eigen::Array3d p = lo + step * Eigen::Array3d(i, j, k);
        const double w = (i == 0 || i == n - 1 ? 0.5 : 1.0) * (j == 0 || j == n - 1 ? 0.5 : 1.0) *
                         (k == 0 || k == n - 1 ? 0.5 : 1.0);
        total += w * std::exp(gaussian_log_density_total(p, mean, log_std));
      }
  total *= step.prod();
  CHECK(std::abs(total - 1.0) < 1e-6);
}

TEST_CASE("closed-form KL") {
  auto kl = [](double mu, double sigma) {
    return kl_diag_gaussian(Eigen::Array<double, 1, 1>(mu), Eigen::Array<double, 1, 1>(std::log(sigma)))(0);
  };
  CHECK(kl(0, 1) == 0.0);
  CHECK(kl(1, 1) == doctest::Approx(0.5));
  // Numerical integration of q log(q / p).
  double integral = 0.0;
  const int n = 20001;
  const double lo = -40, hi = 40, h = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double z = lo + i * h;
    const double lq = normal_logpdf(z, 0, 2), lp = normal_logpdf(z, 0, 1);
    integral += (i == 0 || i == n - 1 ? 0.5 : 1.0) * std::exp(lq) * (lq - lp);
  }
  integral *= h;
  CHECK(kl(0, 2) == doctest::Approx(integral).epsilon(1e-9));
  CHECK(kl(0, 2) == doctest::Approx(0.5 * (4 - 1 - std::log(4.0))));

  Graph g;
  Tensor m = g.variable(random_matrix(3, 2, 1));
  Tensor s = g.variable(random_matrix(3, 2, 2, 0.3));
  const Tensor t = kl_diag_gaussian(GaussianPosterior{m, s});
  CHECK(t.shape() == Shape{3, 2});
  const Array closed = kl_diag_gaussian(m.value(), s.value());
  CHECK(t.value().isApprox(closed, 1e-14));
}

TEST_CASE("reconstruction log-likelihood") {
  const RowMatrix x = random_matrix(3, 8, 3);
  CHECK(recon_loglik(x, x) == doctest::Approx(-8 * 0.5 * kLn2Pi).epsilon(1e-15));
  const RowMatrix one = RowMatrix::Constant(1, 1, 1.0), zero = RowMatrix::Zero(1, 1);
  CHECK(recon_loglik(one, zero) == doctest::Approx(-0.5 - 0.5 * kLn2Pi));

  // Independent density-sum oracle.
  const RowMatrix y = random_matrix(3, 8, 4);
  double oracle = 0.0;
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 8; ++j) oracle += normal_logpdf(x(i, j), y(i, j), 1.0);
  oracle /= 3.0;
  CHECK(std::abs(recon_loglik(x, y) - oracle) < 1e-10);

  Graph g;
  const Tensor tx = reshape(g.constant(x.transpose().eval()), {8, 3, 1});
  const Tensor ty = reshape(g.constant(y.transpose().eval()), {8, 3, 1});
  CHECK(std::abs(recon_loglik(tx, ty, 1).item() - oracle) < 1e-10);
}

TEST_CASE("decomposition guards and degenerate cases") {
  PosteriorValues one{RowMatrix::Zero(1, 2), RowMatrix::Zero(1, 2)};
  CHECK_THROWS_AS(terms_of(RowMatrix::Zero(1, 2), one, 1), ContractViolation);

  // One posterior replicated: q(z) = q(z|x), factorized.
  const Index B = 32;
  PosteriorValues rep{RowMatrix::Zero(B, 3), RowMatrix::Zero(B, 3)};
  rep.mean.rowwise() = Eigen::RowVector3d(0.5, -1.0, 0.2);
  rep.log_std.rowwise() = Eigen::RowVector3d(-0.2, 0.1, 0.3);
  RowMatrix z = rep.mean + (rep.log_std.array().exp() * random_matrix(B, 3, 6).array()).matrix();
  const auto t = terms_of(z, rep, B);
  CHECK(std::abs(t.index_code_mi) < 1e-12);
  CHECK(std::abs(t.total_correlation) < 1e-12);
}

TEST_CASE("estimates are symmetric in sample order") {
  const PosteriorValues post{random_matrix(6, 3, 7), random_matrix(6, 3, 8, 0.3)};
  const RowMatrix z = random_matrix(6, 3, 9);
  const std::vector<Index> perm{3, 0, 5, 1, 4, 2};
  PosteriorValues pp{post.mean, post.log_std};
  RowMatrix zp = z;
  for (Index i = 0; i < 6; ++i) {
    pp.mean.row(i) = post.mean.row(perm[i]);
    pp.log_std.row(i) = post.log_std.row(perm[i]);
    zp.row(i) = z.row(perm[i]);
  }
  const auto a = terms_of(z, post, 100), b = terms_of(zp, pp, 100);
  CHECK(a.index_code_mi == doctest::Approx(b.index_code_mi).epsilon(1e-12));
  CHECK(a.total_correlation == doctest::Approx(b.total_correlation).epsilon(1e-12));
  CHECK(a.dimension_kl == doctest::Approx(b.dimension_kl).epsilon(1e-12));
}

TEST_CASE("full-batch decomposition sums to the closed-form KL") {
  for (std::uint64_t seed : {10u, 11u, 12u}) {
    const Index B = 64;
    const PosteriorValues post{random_matrix(B, 4, seed, 0.8), random_matrix(B, 4, seed + 100, 0.3)};
    const double kl = mean_closed_form_kl(post);
    const auto t = decompose_dataset(post, 64, CounterRng(seed), 512);
    CHECK(std::abs(t.kl_sum() - kl) <= 0.05 * std::max(1.0, kl));
    CHECK(t.index_code_mi >= -0.1);
    CHECK(t.total_correlation >= -0.1);
    CHECK(t.dimension_kl >= -0.1);
  }
}

TEST_CASE("two-point dataset against the exact mixture") {
  const double mu[2][2] = {{1, 1}, {-1, -1}};
  const auto oracle = mixture_oracle(mu, 200000, 13);
  PosteriorValues post{(RowMatrix(2, 2) << 1, 1, -1, -1).finished(), RowMatrix::Zero(2, 2)};
  double mi = 0, tc = 0, dkl = 0;
  const int reps = 50000;
  CounterRng rng(14);
  RowMatrix z(2, 2);
  for (int r = 0; r < reps; ++r) {
    for (Index i = 0; i < 4; ++i) z.data()[i] = post.mean.data()[i] + rng.normal();
    const auto t = terms_of(z, post, 2);
    mi += t.index_code_mi;
    tc += t.total_correlation;
    dkl += t.dimension_kl;
  }
  CHECK(mi / reps == doctest::Approx(oracle.index_code_mi).epsilon(0.05));
  CHECK(tc / reps == doctest::Approx(oracle.total_correlation).epsilon(0.05));
  CHECK(dkl / reps == doctest::Approx(oracle.dimension_kl).epsilon(0.05));
}

TEST_CASE("objective weights") {
  const DecompositionTerms t{0.5, 0.2, 0.3, -10.0};
  ObjectiveConfig c;
  c.mode = ObjectiveMode::Dts;
  c.beta = 4;
  c.alpha = 3;
  CHECK(objective(c, t) == doctest::Approx(12.5).epsilon(1e-15));

  const DecompositionTerms u{0.731, 0.118, 1.907, -53.25};
  ObjectiveConfig dts0{ObjectiveMode::Dts, 0.0, 2.5, 10};
  ObjectiveConfig beta{ObjectiveMode::Beta, 0.0, 2.5, 10};
  CHECK(objective(dts0, u) == objective(beta, u));
  ObjectiveConfig beta1{ObjectiveMode::Beta, 0.0, 1.0, 10};
  ObjectiveConfig vanilla{ObjectiveMode::Vanilla, 7.0, 9.0, 10};
  CHECK(objective(beta1, u) == objective(vanilla, u));

  ObjectiveConfig cancel{ObjectiveMode::Dts, 4.0, 4.0, 10};
  CHECK(cancel.weights().mi == 0.0);
  DecompositionTerms more_mi = u;
  more_mi.index_code_mi += 5.0;
  CHECK(objective(cancel, u) == objective(cancel, more_mi));

  ObjectiveConfig runaway{ObjectiveMode::Dts, 20.0, 4.0, 10};
  CHECK(runaway.validate().size() == 1);
  CHECK(cancel.validate().empty());
  ObjectiveConfig bad{ObjectiveMode::Beta, 0.0, 0.5, 10};
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  CHECK(parse_objective_mode("dts") == ObjectiveMode::Dts);
  CHECK_THROWS_AS(parse_objective_mode("gan"), ContractViolation);
}

TEST_CASE("vanilla objective at full batch matches the ELBO") {
  SynthSpec sp;
  sp.steps = 16;
  sp.samples_per_domain = 32;
  const SeriesDataset ds = normalize(synth_generate(sp)).data;
  VaeModel m = VaeModel::init(1, 8, LatentSpec::single(3), 1);
  const auto post = encode_values(m, ds.windows, ds.steps);
  const auto t = decompose_dataset(post, 64, CounterRng(2), 512, &m, &ds.windows, ds.steps);
  ObjectiveConfig v{ObjectiveMode::Vanilla, 0.0, 1.0, ds.size()};
  const double elbo_loss = -t.recon_loglik + mean_closed_form_kl(post);
  CHECK(std::abs(objective(v, t) - elbo_loss) <= 0.05 * std::abs(elbo_loss));
}

TEST_CASE("full DTS loss gradient on a 4-sample batch") {
  SynthSpec sp;
  sp.steps = 12;
  sp.samples_per_domain = 8;
  const SeriesDataset ds = normalize(synth_generate(sp)).data;
  VaeModel m = VaeModel::init(1, 5, LatentSpec::single(3), 3);
  const std::vector<Index> rows{0, 2, 5, 7};
  const RowMatrix noise = random_matrix(4, 3, 15);
  ObjectiveConfig obj{ObjectiveMode::Dts, 4.0, 4.0, ds.size()};
  auto f = [&](Graph& g) { return elbo_step(g, m, ds, rows, obj, noise).loss; };
  CHECK(grad_check(f, m.params()) < 1e-4);
  ObjectiveConfig beta{ObjectiveMode::Beta, 0.0, 4.0, ds.size()};
  auto fb = [&](Graph& g) { return elbo_step(g, m, ds, rows, beta, noise).loss; };
  CHECK(grad_check(fb, m.params()) < 1e-4);
}

TEST_CASE("training") {
  SynthSpec sp;
  sp.steps = 16;
  sp.samples_per_domain = 96;
  const SeriesDataset ds = normalize(synth_generate(sp)).data;
  TrainConfig cfg;
  cfg.batch = 16;
  cfg.lr = 5e-3;

  SUBCASE("zero epochs leave the model unchanged") {
    VaeModel m = VaeModel::init(1, 6, LatentSpec::single(3), 4);
    VaeModel before = m;
    TrainState st;
    const auto log = train_individual(m, st, ds, ObjectiveConfig{}, cfg, 0);
    CHECK(log.empty());
    CHECK(st.epoch == 0);
    auto a = m.params(), b = before.params();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i]->value.array() == b[i]->value.array()).all());
  }

  SUBCASE("loss decreases in every mode") {
    for (auto mode : {ObjectiveMode::Vanilla, ObjectiveMode::Beta, ObjectiveMode::Dts}) {
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        VaeModel m = VaeModel::init(1, 8, LatentSpec::single(3), seed);
        TrainState st;
        cfg.seed = seed;
        cfg.log_samples = 4;
        ObjectiveConfig obj{mode, mode == ObjectiveMode::Dts ? 4.0 : 0.0, mode == ObjectiveMode::Vanilla ? 1.0 : 4.0,
                            ds.size()};
        const auto log = train_individual(m, st, ds, obj, cfg, 8);
        CAPTURE(to_string(mode));
        CAPTURE(seed);
        CHECK(log.back().loss < log.front().loss);
      }
    }
  }

  SUBCASE("a custom batch plan is honored and logged terms are finite") {
    VaeModel m = VaeModel::init(1, 6, LatentSpec::single(3), 5);
    TrainState st;
    BatchPlanFn plan = [&](Index) {
      BatchPlan p(1);
      p[0].resize(ds.size());
      std::iota(p[0].begin(), p[0].end(), Index{0});
      return p;
    };
    const auto log = train_individual(m, st, ds, ObjectiveConfig{}, cfg, 2, {}, plan);
    CHECK(st.adam.step == 2);
    CHECK(std::isfinite(log.back().terms.kl_sum()));
  }
}

}  // TEST_SUITE
