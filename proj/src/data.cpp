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

#include "dts/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dts/rng.hpp"

namespace dts {

// ---- dataset ------------------------------------------------------------------

void SeriesDataset::validate() const {
  require(steps >= 1 && channels >= 1, "dataset needs positive steps and channels");
  require(windows.cols() == steps * channels, "window width " + std::to_string(windows.cols()) +
                                                  " != T*D = " + std::to_string(steps * channels));
  const auto n = static_cast<std::size_t>(size());
  require(ids.size() == n, "ids not aligned with windows");
  require(labels.empty() || labels.size() == n, "labels not aligned with windows");
  require(domains.empty() || domains.size() == n, "domains not aligned with windows");
  require(!factors || factors->rows() == size(), "factors not aligned with windows");
  if (!windows.allFinite()) throw NumericFailure("dataset contains non-finite values");
}

SeriesDataset SeriesDataset::subset(std::span<const Index> rows) const {
  SeriesDataset out;
  out.steps = steps;
  out.channels = channels;
  out.norm = norm;
  out.windows.resize(static_cast<Index>(rows.size()), windows.cols());
  if (factors) out.factors = RowMatrix(static_cast<Index>(rows.size()), factors->cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    require(r >= 0 && r < size(), "subset row out of range");
    out.windows.row(static_cast<Index>(i)) = windows.row(r);
    out.ids.push_back(ids[r]);
    if (!labels.empty()) out.labels.push_back(labels[r]);
    if (!domains.empty()) out.domains.push_back(domains[r]);
    if (factors) out.factors->row(static_cast<Index>(i)) = factors->row(r);
  }
  return out;
}

SeriesDataset SeriesDataset::domain_rows(Index domain) const {
  require(has_domains(), "dataset has no domain column");
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i)
    if (domains[i] == domain) rows.push_back(i);
  return subset(rows);
}

Index SeriesDataset::label_cardinality() const {
  Index k = 0;
  for (Index l : labels) k = std::max(k, l + 1);
  return k;
}

SeriesDataset concat(const SeriesDataset& a, const SeriesDataset& b) {
  require(a.steps == b.steps && a.channels == b.channels, "concat of datasets with different schemas");
  SeriesDataset out;
  out.steps = a.steps;
  out.channels = a.channels;
  out.norm = a.norm;
  out.windows.resize(a.size() + b.size(), a.windows.cols());
  out.windows.topRows(a.size()) = a.windows;
  out.windows.bottomRows(b.size()) = b.windows;
  out.ids = a.ids;
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  if (a.has_labels() && b.has_labels()) {
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  }
  if (a.has_domains() && b.has_domains()) {
    out.domains = a.domains;
    out.domains.insert(out.domains.end(), b.domains.begin(), b.domains.end());
  }
  if (a.factors && b.factors && a.factors->cols() == b.factors->cols()) {
    RowMatrix f(a.size() + b.size(), a.factors->cols());
    f.topRows(a.size()) = *a.factors;
    f.bottomRows(b.size()) = *b.factors;
    out.factors = std::move(f);
  }
  return out;
}

// ---- synthetic generator -----------------------------------------------------

std::string to_string(Waveform w) {
  switch (w) {
    case Waveform::Sine: return "sine";
    case Waveform::Square: return "square";
    case Waveform::Sawtooth: return "sawtooth";
  }
  return "?";
}

Waveform parse_waveform(const std::string& s) {
  if (s == "sine") return Waveform::Sine;
  if (s == "square") return Waveform::Square;
  if (s == "sawtooth") return Waveform::Sawtooth;
  throw ContractViolation("unknown waveform '" + s + "'");
}

double waveform_value(Waveform w, double theta) {
  switch (w) {
    case Waveform::Sine:
      return std::sin(theta);
    case Waveform::Square:
      return std::sin(theta) >= 0.0 ? 1.0 : -1.0;
    case Waveform::Sawtooth: {
      const double cycles = theta / (2.0 * std::numbers::pi);
      return 2.0 * (cycles - std::floor(cycles)) - 1.0;
    }
  }
  return 0.0;
}

void SynthSpec::validate() const {
  require(steps >= 1, "synth.steps must be >= 1");
  require(samples_per_domain >= 1, "synth.samples_per_domain must be >= 1");
  require(domains == 1 || domains == 2, "synth.domains must be 1 or 2");
  require(!amplitude_levels.empty(), "synth.amplitude_levels must be nonempty");
  require(freq_min >= 1.0 && freq_max >= freq_min, "synth frequency range must satisfy 1 <= min <= max");
  require(phase_max >= phase_min, "synth phase range inverted");
  require(slope_max >= slope_min, "synth slope range inverted");
  require(!waveforms.empty(), "synth.waveforms must be nonempty");
  require(noise_std >= 0.0, "synth.noise_std must be >= 0");
  require(domain_freq_scale > 0.0, "synth.domain_freq_scale must be positive");
}

SeriesDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  const Index T = spec.steps;
  const Index N = spec.samples_per_domain * spec.domains;
  SeriesDataset ds;
  ds.steps = T;
  ds.channels = 1;
  ds.windows.resize(N, T);
  RowMatrix factors(N, kSynthFactorCount);
  const CounterRng root(spec.seed);
  for (Index d = 0; d < spec.domains; ++d) {
    for (Index i = 0; i < spec.samples_per_domain; ++i) {
      const Index row = d * spec.samples_per_domain + i;
      CounterRng rng = root.split({7, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i)});
      const double amp = spec.amplitude_levels[rng.below(spec.amplitude_levels.size())];
      double freq = rng.uniform(spec.freq_min, spec.freq_max);
      const double phase = rng.uniform(spec.phase_min, spec.phase_max);
      const double slope = rng.uniform(spec.slope_min, spec.slope_max);
      const auto cls = static_cast<Index>(rng.below(spec.waveforms.size()));
      const double offset = d == 1 ? spec.domain_offset : 0.0;
      if (d == 1) freq *= spec.domain_freq_scale;
      for (Index t = 0; t < T; ++t) {
        const double pos = static_cast<double>(t) / static_cast<double>(T);
        double x = amp * waveform_value(spec.waveforms[cls], 2.0 * std::numbers::pi * freq * pos + phase) +
                   slope * pos + offset;
        if (spec.noise_std > 0.0) x += spec.noise_std * rng.normal();
        ds.windows(row, t) = x;
      }
      factors.row(row) << amp, freq, phase, slope, static_cast<double>(cls);
      ds.ids.push_back("d" + std::to_string(d) + "_" + std::to_string(i));
      ds.labels.push_back(cls);
      ds.domains.push_back(d);
    }
  }
  ds.factors = std::move(factors);
  return ds;
}

// ---- CSV ------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_number(const std::string& cell, long line, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  const auto res = std::from_chars(first, last, v);
  if (first == last || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": non-numeric value '" + cell + "' in column '" + column + "'",
                     line);
  }
  return v;
}

Index parse_index(const std::string& cell, long line, const std::string& column) {
  const double v = parse_number(cell, line, column);
  if (v != std::floor(v) || v < 0) {
    throw ParseError("line " + std::to_string(line) + ": column '" + column + "' needs a non-negative integer", line);
  }
  return static_cast<Index>(v);
}

void expect_header(const std::vector<std::string>& header, const std::vector<std::string>& expected,
                   const std::string& path) {
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= header.size() || header[i] != expected[i]) {
      throw ParseError(path + ": line 1: missing column '" + expected[i] + "' at position " + std::to_string(i), 1);
    }
  }
  if (header.size() != expected.size()) {
    throw ParseError(path + ": line 1: expected " + std::to_string(expected.size()) + " columns, found " +
                         std::to_string(header.size()),
                     1);
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

}  // namespace

SeriesDataset load_csv(const std::string& path, const CsvSchema& schema,
                       const std::optional<std::string>& factors_path) {
  require(schema.steps >= 1 && schema.channels >= 1 && schema.factors >= 0, "invalid CSV schema");
  std::ifstream in = open_input(path);
  const Index width = schema.steps * schema.channels;

  std::string line;
  if (!std::getline(in, line) || line.empty()) throw ParseError(path + ": empty dataset file", 1);
  std::vector<std::string> expected{"id", "domain", "label"};
  for (Index v = 0; v < width; ++v) expected.push_back("v" + std::to_string(v));
  expect_header(split_csv_line(line), expected, path);

  std::vector<std::vector<double>> rows;
  SeriesDataset ds;
  ds.steps = schema.steps;
  ds.channels = schema.channels;
  std::vector<Index> labels;
  bool any_label = false;
  std::set<std::string> seen;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != width + 3) {
      throw ParseError(path + ": line " + std::to_string(lineno) + ": expected " + std::to_string(width) +
                           " values, found " + std::to_string(static_cast<long>(cells.size()) - 3),
                       lineno);
    }
    if (cells[0].empty()) throw ParseError(path + ": line " + std::to_string(lineno) + ": empty id", lineno);
    if (!seen.insert(cells[0]).second) {
      throw ParseError(path + ": line " + std::to_string(lineno) + ": duplicate id '" + cells[0] + "'", lineno);
    }
    const Index domain = parse_index(cells[1], lineno, "domain");
    if (domain > 1) throw ParseError(path + ": line " + std::to_string(lineno) + ": domain must be 0 or 1", lineno);
    Index label = kNoLabel;
    if (!cells[2].empty()) {
      label = parse_index(cells[2], lineno, "label");
      any_label = true;
    }
    std::vector<double> values(width);
    for (Index v = 0; v < width; ++v) values[v] = parse_number(cells[v + 3], lineno, expected[v + 3]);
    rows.push_back(std::move(values));
    ds.ids.push_back(cells[0]);
    ds.domains.push_back(domain);
    labels.push_back(label);
  }
  if (rows.empty()) throw ParseError(path + ": empty dataset (no data rows)", lineno);

  ds.windows.resize(static_cast<Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    ds.windows.row(static_cast<Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(rows[r].data(), width);
  if (any_label) ds.labels = std::move(labels);

  if (factors_path) {
    require(schema.factors >= 1, "factors file given but schema declares K = 0");
    std::ifstream fin = open_input(*factors_path);
    if (!std::getline(fin, line) || line.empty()) throw ParseError(*factors_path + ": empty factors file", 1);
    std::vector<std::string> fexp{"id"};
    for (Index k = 0; k < schema.factors; ++k) fexp.push_back("f" + std::to_string(k));
    expect_header(split_csv_line(line), fexp, *factors_path);
    std::unordered_map<std::string, Eigen::RowVectorXd> by_id;
    long fl = 1;
    while (std::getline(fin, line)) {
      ++fl;
      if (line.empty() || line == "\r") continue;
      const auto cells = split_csv_line(line);
      if (static_cast<Index>(cells.size()) != schema.factors + 1) {
        throw ParseError(*factors_path + ": line " + std::to_string(fl) + ": expected " +
                             std::to_string(schema.factors) + " factor values",
                         fl);
      }
      Eigen::RowVectorXd f(schema.factors);
      for (Index k = 0; k < schema.factors; ++k) f[k] = parse_number(cells[k + 1], fl, fexp[k + 1]);
      if (!by_id.emplace(cells[0], f).second) {
        throw ParseError(*factors_path + ": line " + std::to_string(fl) + ": duplicate id '" + cells[0] + "'", fl);
      }
    }
    RowMatrix factors(ds.size(), schema.factors);
    for (Index r = 0; r < ds.size(); ++r) {
      const auto it = by_id.find(ds.ids[r]);
      if (it == by_id.end()) throw ParseError(*factors_path + ": no factors for id '" + ds.ids[r] + "'");
      factors.row(r) = it->second;
    }
    ds.factors = std::move(factors);
  }
  ds.validate();
  return ds;
}

void write_csv(const SeriesDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw ContractViolation("cannot write '" + path + "'");
  out << "id,domain,label";
  for (Index v = 0; v < ds.windows.cols(); ++v) out << ",v" << v;
  out << '\n';
  for (Index r = 0; r < ds.size(); ++r) {
    out << ds.ids[r] << ',' << (ds.has_domains() ? ds.domains[r] : 0) << ',';
    if (ds.has_labels() && ds.labels[r] != kNoLabel) out << ds.labels[r];
    for (Index v = 0; v < ds.windows.cols(); ++v) out << ',' << format_double(ds.windows(r, v));
    out << '\n';
  }
  if (!out) throw ContractViolation("failed writing '" + path + "'");
}

void write_factors_csv(const SeriesDataset& ds, const std::string& path) {
  require(ds.factors.has_value(), "dataset has no factors to write");
  std::ofstream out(path);
  if (!out) throw ContractViolation("cannot write '" + path + "'");
  out << "id";
  for (Index k = 0; k < ds.factors->cols(); ++k) out << ",f" << k;
  out << '\n';
  for (Index r = 0; r < ds.size(); ++r) {
    out << ds.ids[r];
    for (Index k = 0; k < ds.factors->cols(); ++k) out << ',' << format_double((*ds.factors)(r, k));
    out << '\n';
  }
}

RowMatrix window_series(const RowMatrix& raw, Index steps) {
  require(steps >= 1, "window length must be >= 1");
  const Index D = raw.cols(), count = raw.rows() / steps;
  RowMatrix out(count, steps * D);
  for (Index w = 0; w < count; ++w)
    for (Index t = 0; t < steps; ++t) out.block(w, t * D, 1, D) = raw.row(w * steps + t);
  return out;
}

// ---- normalization -----------------------------------------------------------

NormStats channel_stats(const SeriesDataset& ds) {
  require(ds.size() > 0, "statistics of an empty dataset");
  const Index D = ds.channels;
  NormStats s{Eigen::VectorXd::Zero(D), Eigen::VectorXd::Zero(D)};
  const double count = static_cast<double>(ds.size() * ds.steps);
  for (Index c = 0; c < D; ++c) {
    double sum = 0.0;
    for (Index r = 0; r < ds.size(); ++r)
      for (Index t = 0; t < ds.steps; ++t) sum += ds.windows(r, t * D + c);
    const double mu = sum / count;
    double sq = 0.0;
    for (Index r = 0; r < ds.size(); ++r)
      for (Index t = 0; t < ds.steps; ++t) sq += (ds.windows(r, t * D + c) - mu) * (ds.windows(r, t * D + c) - mu);
    s.mean[c] = mu;
    s.std[c] = std::sqrt(sq / count);
  }
  return s;
}

NormalizeResult normalize(const SeriesDataset& ds, const std::optional<NormStats>& stats) {
  require(ds.size() > 0, "normalize on an empty dataset");
  NormalizeResult res;
  res.stats = stats ? *stats : channel_stats(ds);
  require(res.stats.mean.size() == ds.channels && res.stats.std.size() == ds.channels,
          "normalization stats have " + std::to_string(res.stats.mean.size()) + " channels, dataset has " +
              std::to_string(ds.channels));
  for (Index c = 0; c < ds.channels; ++c) {
    if (!(res.stats.std[c] >= 1e-8)) {
      res.warnings.push_back("channel " + std::to_string(c) + " has near-zero variance; std floored at 1e-8");
      res.stats.std[c] = 1e-8;
    }
  }
  res.data = ds;
  const Index D = ds.channels;
  for (Index r = 0; r < ds.size(); ++r)
    for (Index t = 0; t < ds.steps; ++t)
      for (Index c = 0; c < D; ++c) {
        double& x = res.data.windows(r, t * D + c);
        x = (x - res.stats.mean[c]) / res.stats.std[c];
      }
  res.data.norm = res.stats;
  return res;
}

}  // namespace dts
