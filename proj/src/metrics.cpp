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

#include "dts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dts/optim.hpp"

namespace dts {

// ---- discretization and information ------------------------------------------

Codes discretize_equal_width(const Eigen::VectorXd& values, Index bins) {
  require(bins >= 1, "need at least one bin");
  Codes out(values.size(), 0);
  if (values.size() == 0) return out;
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  if (!(hi > lo)) return out;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (Index i = 0; i < values.size(); ++i)
    out[i] = std::min<Index>(bins - 1, static_cast<Index>(std::floor((values[i] - lo) / width)));
  return out;
}

std::vector<Codes> discretize_factors(const RowMatrix& factors, Index max_levels) {
  std::vector<Codes> out;
  for (Index k = 0; k < factors.cols(); ++k) {
    const Eigen::VectorXd col = factors.col(k);
    std::vector<double> distinct(col.data(), col.data() + col.size());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (static_cast<Index>(distinct.size()) <= max_levels) {
      Codes c(col.size());
      for (Index i = 0; i < col.size(); ++i)
        c[i] = std::lower_bound(distinct.begin(), distinct.end(), col[i]) - distinct.begin();
      out.push_back(std::move(c));
    } else {
      out.push_back(discretize_equal_width(col, max_levels));
    }
  }
  return out;
}

namespace {

std::map<Index, double> counts(std::span<const Index> a) {
  std::map<Index, double> c;
  for (Index v : a) c[v] += 1.0;
  return c;
}

}  // namespace

double entropy(std::span<const Index> a) {
  require(!a.empty(), "entropy of an empty sample");
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (const auto& [v, c] : counts(a)) h -= (c / n) * std::log(c / n);
  return std::max(0.0, h);
}

double mutual_information(std::span<const Index> a, std::span<const Index> b) {
  require(a.size() == b.size() && !a.empty(), "mutual_information needs equal-length nonempty samples");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<Index, Index>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) joint[{a[i], b[i]}] += 1.0;
  const auto ca = counts(a), cb = counts(b);
  double mi = 0.0;
  for (const auto& [key, c] : joint) mi += (c / n) * std::log(c * n / (ca.at(key.first) * cb.at(key.second)));
  return std::max(0.0, mi);
}

MigResult mig(const RowMatrix& latent_means, const std::vector<Codes>& factors, Index bins) {
  require(latent_means.rows() >= 100, "MIG needs at least 100 rows");
  require(latent_means.cols() >= 1, "MIG needs at least one latent dimension");
  require(!factors.empty(), "MIG needs at least one factor");
  std::vector<Codes> latents;
  for (Index j = 0; j < latent_means.cols(); ++j)
    latents.push_back(discretize_equal_width(latent_means.col(j), bins));

  MigResult res;
  double total = 0.0;
  Index used = 0;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    require(static_cast<Index>(factors[k].size()) == latent_means.rows(), "factor column not aligned with latents");
    const double h = entropy(factors[k]);
    if (h <= 0.0) {
      res.warnings.push_back("factor " + std::to_string(k) + " is constant; skipped");
      res.per_factor.push_back(std::nan(""));
      continue;
    }
    std::vector<double> mis;
    for (const auto& z : latents) mis.push_back(mutual_information(z, factors[k]));
    std::sort(mis.begin(), mis.end(), std::greater<>());
    const double second = mis.size() > 1 ? mis[1] : 0.0;
    const double gap = std::clamp((mis[0] - second) / h, 0.0, 1.0);
    res.per_factor.push_back(gap);
    total += gap;
    ++used;
  }
  if (used == 0) throw ContractViolation("MIG undefined: every factor is constant");
  res.score = total / static_cast<double>(used);
  return res;
}

Index active_units(const RowMatrix& latent_means, double threshold) {
  Index n = 0;
  if (latent_means.rows() == 0) return 0;
  for (Index j = 0; j < latent_means.cols(); ++j) {
    const auto col = latent_means.col(j).array();
    const double var = (col - col.mean()).square().mean();
    n += var > threshold;
  }
  return n;
}

// ---- traversal ------------------------------------------------------------------

std::vector<double> traversal_grid(double lo, double hi, Index steps) {
  require(steps >= 2, "traversal needs at least 2 grid steps");
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "traversal range must satisfy lo < hi");
  std::vector<double> grid(steps);
  for (Index i = 0; i < steps; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
  return grid;
}

TraversalSet traverse(VaeModel& model, const RowMatrix& seed_windows, std::span<const std::string> seed_ids,
                      Index series_steps, double lo, double hi, Index grid_steps) {
  require(seed_windows.rows() >= 1, "traversal needs at least one seed window");
  require(static_cast<Index>(seed_ids.size()) == seed_windows.rows(), "one id per seed window");
  require(seed_windows.cols() == series_steps * model.channels,
          "seed windows have width " + std::to_string(seed_windows.cols()) + ", model expects " +
              std::to_string(series_steps * model.channels));
  TraversalSet set;
  set.grid = traversal_grid(lo, hi, grid_steps);
  set.seed_ids.assign(seed_ids.begin(), seed_ids.end());
  set.latent = model.latent().total();
  set.steps = series_steps;
  set.channels = model.channels;
  const Index S = seed_windows.rows(), Z = set.latent, G = grid_steps;
  set.series.resize(S * Z * G, series_steps * model.channels);
  set.reconstructions.resize(S, series_steps * model.channels);

  const PosteriorValues post = encode_values(model, seed_windows, series_steps);
  for (Index s = 0; s < S; ++s) {
    RowMatrix z(Z * G + 1, Z);
    for (Index d = 0; d < Z; ++d)
      for (Index k = 0; k < G; ++k) {
        z.row(d * G + k) = post.mean.row(s);
        z(d * G + k, d) = set.grid[k];
      }
    z.row(Z * G) = post.mean.row(s);
    const RowMatrix decoded = decode_values(model, z, series_steps, 1);
    set.series.middleRows(s * Z * G, Z * G) = decoded.topRows(Z * G);
    set.reconstructions.row(s) = decoded.row(Z * G);
  }
  return set;
}

void write_traversal_csv(const TraversalSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractViolation("cannot write '" + path + "'");
  out << "seed_id,latent_dim,grid_value,t,channel,value\n";
  const Index G = static_cast<Index>(set.grid.size());
  for (std::size_t s = 0; s < set.seed_ids.size(); ++s)
    for (Index d = 0; d < set.latent; ++d)
      for (Index k = 0; k < G; ++k) {
        const Index r = set.row(static_cast<Index>(s), d, k);
        for (Index t = 0; t < set.steps; ++t)
          for (Index c = 0; c < set.channels; ++c)
            out << set.seed_ids[s] << ',' << d << ',' << format_double(set.grid[k]) << ',' << t << ',' << c << ','
                << format_double(set.series(r, t * set.channels + c)) << '\n';
      }
  if (!out) throw ContractViolation("failed writing '" + path + "'");
}

// ---- probes ---------------------------------------------------------------------

double probe_accuracy(const RowMatrix& features, std::span<const Index> labels, double heldout_fraction,
                      std::uint64_t seed) {
  const Index B = features.rows(), m = features.cols();
  require(static_cast<Index>(labels.size()) == B, "probe: one label per feature row");
  require(B >= 50, "probe needs at least 50 rows");
  require(heldout_fraction > 0.0 && heldout_fraction < 1.0, "held-out fraction must be in (0, 1)");
  std::vector<Index> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  require(classes.size() >= 2, "probe needs at least two classes");
  for (Index c : classes) require(c >= 0, "probe labels must be non-negative");
  const Index K = classes.back() + 1;

  std::vector<Index> order(B);
  std::iota(order.begin(), order.end(), Index{0});
  CounterRng rng = CounterRng(seed).split({31});
  shuffle_in_place(order, rng);
  const Index n_test = std::clamp<Index>(static_cast<Index>(std::lround(heldout_fraction * B)), 1, B - 2);
  const std::vector<Index> test(order.begin(), order.begin() + n_test);
  const std::vector<Index> train(order.begin() + n_test, order.end());

  // Standardize with training statistics.
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(m), sd = Eigen::RowVectorXd::Zero(m);
  for (Index r : train) mu += features.row(r);
  mu /= static_cast<double>(train.size());
  for (Index r : train) sd += (features.row(r) - mu).array().square().matrix();
  sd = (sd / static_cast<double>(train.size())).array().sqrt().max(1e-8).matrix();
  auto standardized = [&](const std::vector<Index>& rows) {
    RowMatrix x(static_cast<Index>(rows.size()), m);
    for (std::size_t i = 0; i < rows.size(); ++i)
      x.row(static_cast<Index>(i)) = (features.row(rows[i]) - mu).array() / sd.array();
    return x;
  };
  const RowMatrix x_train = standardized(train), x_test = standardized(test);
  std::vector<Index> y_train;
  for (Index r : train) y_train.push_back(labels[r]);

  CounterRng init = CounterRng(seed).split({32});
  ClassifierParams probe = ClassifierParams::init(m, std::max<Index>(K, 2), init, "probe");
  auto params = probe.params();
  AdamState adam;
  adam.hyper.lr = 0.05;
  for (int step = 0; step < 300; ++step) {
    zero_grads(params);
    Graph g;
    const Tensor loss = cross_entropy(classify(g, probe, g.constant(x_train)), y_train);
    g.backward(loss);
    adam_step(params, adam);
  }
  const RowMatrix logits = (x_test * probe.layer.weight.value).rowwise() + probe.layer.bias.value.row(0);
  Index hits = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    hits += arg == labels[test[i]];
  }
  return static_cast<double>(hits) / static_cast<double>(n_test);
}

double proxy_discrepancy(const RowMatrix& source, const RowMatrix& target, std::uint64_t seed) {
  require(source.rows() > 0 && target.rows() > 0, "proxy discrepancy needs nonempty source and target");
  require(source.cols() == target.cols(), "source/target feature widths differ");
  const Index n = std::min(source.rows(), target.rows());
  CounterRng rng = CounterRng(seed).split({33});
  auto pick_rows = [&](const RowMatrix& m) {
    std::vector<Index> idx(m.rows());
    std::iota(idx.begin(), idx.end(), Index{0});
    shuffle_in_place(idx, rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  const auto si = pick_rows(source), ti = pick_rows(target);
  RowMatrix x(2 * n, source.cols());
  std::vector<Index> y(2 * n);
  for (Index i = 0; i < n; ++i) {
    x.row(2 * i) = source.row(si[i]);
    y[2 * i] = 0;
    x.row(2 * i + 1) = target.row(ti[i]);
    y[2 * i + 1] = 1;
  }
  const double err = 1.0 - probe_accuracy(x, y, 0.3, seed);
  return std::clamp(2.0 * (1.0 - 2.0 * err), 0.0, 2.0);
}

// ---- evaluation -----------------------------------------------------------------

MetricsReport evaluate(VaeModel& model, const SeriesDataset& ds, const EvalConfig& cfg, GroupModel* group) {
  ds.validate();
  require(ds.channels == model.channels, "dataset channels do not match the model");
  MetricsReport rep;
  const PosteriorValues post = encode_values(model, ds.windows, ds.steps);
  const LatentSpec& spec = model.latent();

  if (ds.size() >= 2) {
    rep.decomposition =
        decompose_dataset(post, cfg.samples, CounterRng(cfg.seed).split({41}), 512, &model, &ds.windows, ds.steps);
  }
  rep.active_units = active_units(post.mean);

  if (ds.factors && ds.size() >= 100) {
    try {
      const MigResult m = mig(post.mean, discretize_factors(*ds.factors, cfg.factor_levels), cfg.latent_bins);
      rep.mig = m.score;
      rep.warnings.insert(rep.warnings.end(), m.warnings.begin(), m.warnings.end());
    } catch (const ContractViolation& e) {
      rep.warnings.push_back(std::string("mig: ") + e.what());
    }
  }

  std::vector<std::pair<std::string, RowMatrix>> views{{"z", post.mean}};
  if (spec.segments.size() > 1) {
    const auto parts = split_latent(post.mean, spec);
    for (std::size_t i = 0; i < parts.size(); ++i) views.emplace_back(spec.segments[i].name, parts[i]);
  }

  auto run_probe = [&](const std::string& task, const std::vector<Index>& rows, const std::vector<Index>& labels) {
    std::vector<Index> distinct = labels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (rows.size() < 50 || distinct.size() < 2) return;
    for (const auto& [name, feats] : views) {
      RowMatrix f(static_cast<Index>(rows.size()), feats.cols());
      for (std::size_t i = 0; i < rows.size(); ++i) f.row(static_cast<Index>(i)) = feats.row(rows[i]);
      rep.accuracies[task + "_" + name] = probe_accuracy(f, labels, cfg.heldout_fraction, cfg.seed);
    }
  };

  if (ds.has_labels()) {
    std::vector<Index> rows, labels;
    for (Index r = 0; r < ds.size(); ++r)
      if (ds.labels[r] != kNoLabel) {
        rows.push_back(r);
        labels.push_back(ds.labels[r]);
      }
    run_probe("class", rows, labels);
  }
  if (ds.has_domains()) {
    std::vector<Index> rows(ds.size());
    std::iota(rows.begin(), rows.end(), Index{0});
    run_probe("domain", rows, ds.domains);

    std::vector<Index> src, tgt;
    for (Index r = 0; r < ds.size(); ++r) (ds.domains[r] == 0 ? src : tgt).push_back(r);
    if (!src.empty() && !tgt.empty()) {
      const RowMatrix& feats = group != nullptr ? views[1].second : post.mean;
      RowMatrix fs(static_cast<Index>(src.size()), feats.cols()), ft(static_cast<Index>(tgt.size()), feats.cols());
      for (std::size_t i = 0; i < src.size(); ++i) fs.row(static_cast<Index>(i)) = feats.row(src[i]);
      for (std::size_t i = 0; i < tgt.size(); ++i) ft.row(static_cast<Index>(i)) = feats.row(tgt[i]);
      if (src.size() + tgt.size() >= 50) rep.proxy_discrepancy = proxy_discrepancy(fs, ft, cfg.seed);
    }
  }

  if (group != nullptr && ds.has_labels()) {
    const auto predicted = predict_classes(*group, ds);
    for (Index d : {Index{0}, Index{1}}) {
      std::vector<Index> p, l;
      for (Index r = 0; r < ds.size(); ++r) {
        const Index dom = ds.has_domains() ? ds.domains[r] : 0;
        if (dom == d && ds.labels[r] != kNoLabel) {
          p.push_back(predicted[r]);
          l.push_back(ds.labels[r]);
        }
      }
      if (!l.empty()) rep.accuracies[d == 0 ? "source_class_head" : "target_class_head"] = accuracy(p, l);
    }
  }
  return rep;
}

MetricsReport evaluate(GroupModel& model, const SeriesDataset& ds, const EvalConfig& cfg) {
  return evaluate(model.core, ds, cfg, &model);
}

}  // namespace dts
