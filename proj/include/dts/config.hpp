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
#include <string>
#include <vector>

#include <json.hpp>

#include "dts/data.hpp"
#include "dts/elbo.hpp"
#include "dts/group.hpp"
#include "dts/latent.hpp"
#include "dts/metrics.hpp"
#include "dts/trainer.hpp"

namespace dts {

using Json = nlohmann::json;

/// Invalid configuration value; `field()` is the dotted key, e.g. "train.lr".
class ConfigError : public ContractViolation {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : ContractViolation("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ModelConfig {
  Index latent = 12;
  /// Segment sizes; empty means one segment of `latent` dims.
  std::vector<Index> segments;
  Index hidden = 64;
};

struct TrainSection {
  double lr = 1e-3;
  Index batch = 64;
  Index epochs = 10;
  std::uint64_t seed = 0;
  double clip = 5.0;
  double lambda = 1.0;
  double w_cls = 1.0;
  /// Epochs over which lambda ramps up; 0 keeps it constant.
  double lambda_warmup = 0.0;
  Index log_samples = 1;
};

struct PathsConfig {
  std::string data;
  std::string factors;
  std::string target;
  std::string out;
  std::string ckpt;
  std::string input;
  std::string metrics;
};

struct RunConfig {
  CsvSchema schema;
  ModelConfig model;
  ObjectiveMode mode = ObjectiveMode::Dts;
  double alpha = 4.0;
  double beta = 4.0;
  TrainSection train;
  EvalConfig eval;
  PathsConfig paths;
  std::optional<SynthSpec> synth;

  /// Checks every field; throws ConfigError naming the first bad one.
  /// Returns non-fatal warnings.
  std::vector<std::string> validate() const;

  LatentSpec latent_spec() const;
  ObjectiveConfig objective(Index dataset_size) const;
  TrainConfig train_config() const;
  GroupHyper group_hyper() const;
};

/// Overlays the keys present in `doc` on `base`. Unknown keys and wrongly
/// typed values raise ConfigError.
RunConfig config_from_json(const Json& doc, RunConfig base = {});
Json config_to_json(const RunConfig& cfg);

/// Reads and parses a config file (not validated).
RunConfig load_config(const std::string& path);

Json synth_to_json(const SynthSpec& s);

}  // namespace dts
