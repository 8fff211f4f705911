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

#include <string>
#include <vector>

#include "dts/errors.hpp"
#include "dts/tensor.hpp"

namespace dts {

struct LatentSegment {
  std::string name;
  Index size = 0;
};

/// Partition of the latent vector into named contiguous segments.
struct LatentSpec {
  std::vector<LatentSegment> segments;

  static LatentSpec single(Index size) { return LatentSpec{{{"z", size}}}; }
  /// Class-dependent z_y followed by domain-dependent z_d.
  static LatentSpec class_domain(Index class_size, Index domain_size) {
    return LatentSpec{{{"z_y", class_size}, {"z_d", domain_size}}};
  }

  Index total() const {
    Index n = 0;
    for (const auto& s : segments) n += s.size;
    return n;
  }

  Index offset(std::size_t i) const {
    Index n = 0;
    for (std::size_t k = 0; k < i; ++k) n += segments[k].size;
    return n;
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < segments.size(); ++i)
      if (segments[i].name == name) return i;
    throw ContractViolation("no latent segment named '" + name + "'");
  }

  void validate() const {
    require(!segments.empty(), "latent spec has no segments");
    for (const auto& s : segments) require(s.size > 0, "latent segment '" + s.name + "' has non-positive size");
    for (std::size_t i = 0; i < segments.size(); ++i)
      for (std::size_t j = i + 1; j < segments.size(); ++j)
        require(segments[i].name != segments[j].name, "duplicate latent segment '" + segments[i].name + "'");
  }

  bool operator==(const LatentSpec& o) const {
    if (segments.size() != o.segments.size()) return false;
    for (std::size_t i = 0; i < segments.size(); ++i)
      if (segments[i].name != o.segments[i].name || segments[i].size != o.segments[i].size) return false;
    return true;
  }
};

}  // namespace dts
