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

#include <iosfwd>
#include <string>
#include <vector>

#include "dts/config.hpp"
#include "dts/elbo.hpp"
#include "dts/metrics.hpp"

namespace dts {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitNumericFailure = 2;

/// Runs one subcommand (`args` excludes the program name). Progress lines go
/// to `out`, diagnostics and usage to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// `epoch=.. loss=.. mi=.. tc=.. dim_kl=.. recon=..`
std::string progress_line(Index epoch, double loss, const DecompositionTerms& terms);

/// Metrics document; absent metrics are omitted.
Json report_to_json(const MetricsReport& report, const Json& config_echo);
Json terms_to_json(const DecompositionTerms& terms);

}  // namespace dts
