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

#include <stdexcept>
#include <string>

namespace dts {

/// Caller broke a documented precondition (bad shape, invalid argument, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A NaN/Inf showed up, or an optimization diverged.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `location()` is a row number or a parser offset.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long location = -1)
      : std::runtime_error(what), location_(location) {}
  long location() const { return location_; }

 private:
  long location_;
};

/// A well-formed artifact that is inconsistent with what the caller expects
/// (checkpoint kind or shape mismatches, newer format versions).
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace dts
