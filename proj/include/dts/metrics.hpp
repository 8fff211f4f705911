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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dts/data.hpp"
#include "dts/elbo.hpp"
#include "dts/group.hpp"
#include "dts/nets.hpp"

namespace dts {

using Codes = std::vector<Index>;

/// Equal-width bin index over the empirical [min, max] of `values`; a
/// constant column maps to bin 0.
Codes discretize_equal_width(const Eigen::VectorXd& values, Index bins);

/// Factor columns with at most `max_levels` distinct values become category
/// codes; continuous columns are cut into `max_levels` equal-width bins.
std::vector<Codes> discretize_factors(const RowMatrix& factors, Index max_levels = 10);

/// Plug-in estimates from empirical histograms, in nats.
double entropy(std::span<const Index> a);
double mutual_information(std::span<const Index> a, std::span<const Index> b);

struct MigResult {
  double score = 0.0;
  /// Normalized gap per factor; NaN for skipped factors.
  std::vector<double> per_factor;
  std::vector<std::string> warnings;
};

/// Mutual information gap: latents cut into `bins` equal-width bins, the
/// top-two latent MIs per factor compared and normalized by H(v_k).
/// Constant factors are skipped; if all are, throws ContractViolation.
MigResult mig(const RowMatrix& latent_means, const std::vector<Codes>& factors, Index bins = 20);

/// Dimensions whose posterior mean varies by more than `threshold` over rows.
Index active_units(const RowMatrix& latent_means, double threshold = 0.01);

/// Decoded sweeps of one latent dimension at a time, others at their
/// inferred means. Series are stored [seed][dim][step] in row order.
struct TraversalSet {
  std::vector<std::string> seed_ids;
  std::vector<double> grid;
  Index latent = 0;
  Index steps = 0;     // time steps per series
  Index channels = 1;
  RowMatrix series;    // [seeds * latent * grid, steps * channels]
  RowMatrix reconstructions;  // plain reconstruction per seed

  Index count() const { return series.rows(); }
  Index row(Index seed, Index dim, Index step) const {
    return (seed * latent + dim) * static_cast<Index>(grid.size()) + step;
  }
};

/// Uniform grid of `steps` values over [lo, hi].
std::vector<double> traversal_grid(double lo, double hi, Index steps);

TraversalSet traverse(VaeModel& model, const RowMatrix& seed_windows, std::span<const std::string> seed_ids,
                      Index series_steps, double lo, double hi, Index grid_steps);

/// Long-format CSV `seed_id,latent_dim,grid_value,t,channel,value`.
void write_traversal_csv(const TraversalSet& set, const std::string& path);

/// Fits a fresh softmax-linear probe on a seeded split of standardized
/// features and returns the held-out accuracy.
double probe_accuracy(const RowMatrix& features, std::span<const Index> labels, double heldout_fraction,
                      std::uint64_t seed);

/// 2 (1 - 2 err) of a domain probe on class-balanced source/target features,
/// clamped to [0, 2].
double proxy_discrepancy(const RowMatrix& source, const RowMatrix& target, std::uint64_t seed);

struct EvalConfig {
  Index samples = 8;
  Index latent_bins = 20;
  Index factor_levels = 10;
  double heldout_fraction = 0.3;
  std::uint64_t seed = 0;
};

struct MetricsReport {
  std::optional<double> mig;
  std::optional<DecompositionTerms> decomposition;
  Index active_units = 0;
  std::map<std::string, double> accuracies;
  std::optional<double> proxy_discrepancy;
  std::vector<std::string> warnings;
};

/// Every metric the dataset's annotations allow; the rest stay absent.
/// With a group model, per-segment probes and class-head accuracies are added.
MetricsReport evaluate(VaeModel& model, const SeriesDataset& ds, const EvalConfig& cfg, GroupModel* group = nullptr);
MetricsReport evaluate(GroupModel& model, const SeriesDataset& ds, const EvalConfig& cfg);

}  // namespace dts
