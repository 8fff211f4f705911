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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dts/tensor.hpp"

namespace dts {

inline constexpr Index kNoLabel = -1;

/// Per-channel z-scoring statistics.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

/// Windowed series, one row per window laid out time-major
/// (t0 channels, t1 channels, ...). Optional columns are empty when absent;
/// individual unlabeled rows carry kNoLabel.
struct SeriesDataset {
  Index steps = 128;
  Index channels = 1;
  RowMatrix windows;
  std::vector<std::string> ids;
  std::vector<Index> labels;
  std::vector<Index> domains;
  std::optional<RowMatrix> factors;
  std::optional<NormStats> norm;

  Index size() const { return windows.rows(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_domains() const { return !domains.empty(); }
  /// Row-alignment and finiteness invariants.
  void validate() const;
  SeriesDataset subset(std::span<const Index> rows) const;
  /// Rows whose domain equals `domain`.
  SeriesDataset domain_rows(Index domain) const;
  /// Number of distinct non-missing labels (max label + 1).
  Index label_cardinality() const;
};

/// Rows of `a` followed by rows of `b`; optional columns survive only when
/// both sides have them.
SeriesDataset concat(const SeriesDataset& a, const SeriesDataset& b);

enum class Waveform { Sine, Square, Sawtooth };

std::string to_string(Waveform w);
Waveform parse_waveform(const std::string& s);
/// Unit-amplitude periodic shape at phase angle `theta` (radians).
double waveform_value(Waveform w, double theta);

/// Factor-controlled generator settings. Factors per row are
/// (amplitude, frequency, phase, slope, waveform class).
struct SynthSpec {
  Index steps = 128;
  Index samples_per_domain = 1000;
  Index domains = 1;
  std::vector<double> amplitude_levels{0.5, 1.0, 1.5, 2.0};
  double freq_min = 1.0;  // cycles per window
  double freq_max = 8.0;
  double phase_min = 0.0;
  double phase_max = 6.283185307179586;
  double slope_min = -1.0;
  double slope_max = 1.0;
  std::vector<Waveform> waveforms{Waveform::Sine, Waveform::Square, Waveform::Sawtooth};
  double noise_std = 0.1;
  double domain_offset = 0.0;      // added to every step of domain-1 rows
  double domain_freq_scale = 1.0;  // multiplies the frequency of domain-1 rows
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr Index kSynthFactorCount = 5;

/// x_t = a wave(2 pi f t / T + phi) + s t / T + eps_t. The waveform class is
/// the label; fully determined by the seed.
SeriesDataset synth_generate(const SynthSpec& spec);

/// Declared dataset CSV layout.
struct CsvSchema {
  Index steps = 128;
  Index channels = 1;
  Index factors = 0;
};

/// Reads `id,domain,label,v0,...` rows and, when given, joins a
/// `id,f0,...` factors file on id. Errors carry the 1-based line number.
SeriesDataset load_csv(const std::string& path, const CsvSchema& schema,
                       const std::optional<std::string>& factors_path = std::nullopt);
void write_csv(const SeriesDataset& ds, const std::string& path);
void write_factors_csv(const SeriesDataset& ds, const std::string& path);

/// Non-overlapping windows of `steps` rows from a [L, D] raw series; the
/// trailing remainder is dropped.
RowMatrix window_series(const RowMatrix& raw, Index steps);

struct NormalizeResult {
  SeriesDataset data;
  NormStats stats;
  std::vector<std::string> warnings;
};

/// Per-channel z-scoring with `stats`, or with statistics of `ds` itself.
/// Channel std below 1e-8 is floored at 1e-8 (with a warning).
NormalizeResult normalize(const SeriesDataset& ds, const std::optional<NormStats>& stats = std::nullopt);

/// Per-channel mean and population std over all windows and steps.
NormStats channel_stats(const SeriesDataset& ds);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace dts
