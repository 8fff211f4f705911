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

#include <optional>
#include <string>
#include <vector>

#include "dts/config.hpp"
#include "dts/group.hpp"
#include "dts/nets.hpp"
#include "dts/trainer.hpp"

namespace dts {

inline constexpr int kCheckpointVersion = 1;

enum class ModelKind { Individual, Group };

std::string to_string(ModelKind k);

struct Checkpoint {
  int format_version = kCheckpointVersion;
  ModelKind kind = ModelKind::Individual;
  RunConfig config;
  Index channels = 1;
  /// Class count of the group model's class head; 0 for individual models.
  Index classes = 0;
  std::vector<Parameter> params;
  std::optional<NormStats> norm;
  /// Root key of the counter-based generator; streams derive from it and
  /// the epoch counter.
  std::uint64_t rng_key = 0;
  TrainState state;
  std::string timestamp;
};

Checkpoint make_checkpoint(VaeModel& model, const RunConfig& cfg, const TrainState& state,
                           const std::optional<NormStats>& norm);
Checkpoint make_checkpoint(GroupModel& model, const RunConfig& cfg, const TrainState& state,
                           const std::optional<NormStats>& norm);

/// Rebuilds the model described by the config echo and copies the stored
/// arrays in. Kind, name or shape mismatches raise IntegrityError.
VaeModel restore_individual(const Checkpoint& ckpt);
GroupModel restore_group(const Checkpoint& ckpt);

/// IntegrityError when `cfg` declares a different architecture or schema.
void check_compatible(const Checkpoint& ckpt, const RunConfig& cfg);

Json checkpoint_to_json(const Checkpoint& ckpt);
/// Refuses newer format versions before touching any parameter.
Checkpoint checkpoint_from_json(const Json& doc);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// ParseError (with byte offset) on a corrupt document.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dts
