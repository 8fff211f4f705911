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

#include "dts/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace dts {

namespace {

void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
}

template <class T>
void read(const Json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  const std::string field = where + "." + key;
  const Json& v = obj.at(key);
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    out = v.get<double>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) throw ConfigError(field, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
    out = v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(field, "expected a string");
    out = v.get<std::string>();
  } else if constexpr (std::is_same_v<T, std::vector<Index>>) {
    if (!v.is_array()) throw ConfigError(field, "expected an array of integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ConfigError(field, "expected an array of integers");
      out.push_back(e.get<Index>());
    }
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    if (!v.is_array()) throw ConfigError(field, "expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(field, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }
}

void positive(bool ok, const std::string& field, const std::string& what = "must be positive") {
  if (!ok) throw ConfigError(field, what);
}

bool finite(double v) { return std::isfinite(v); }

SynthSpec synth_from_json(const Json& s, SynthSpec out) {
  check_keys(s, "synth",
             {"samples_per_domain", "domains", "amplitude_levels", "freq_min", "freq_max", "phase_min", "phase_max",
              "slope_min", "slope_max", "waveforms", "noise", "domain_offset", "domain_freq_scale", "seed"});
  read(s, "samples_per_domain", "synth", out.samples_per_domain);
  read(s, "domains", "synth", out.domains);
  read(s, "amplitude_levels", "synth", out.amplitude_levels);
  read(s, "freq_min", "synth", out.freq_min);
  read(s, "freq_max", "synth", out.freq_max);
  read(s, "phase_min", "synth", out.phase_min);
  read(s, "phase_max", "synth", out.phase_max);
  read(s, "slope_min", "synth", out.slope_min);
  read(s, "slope_max", "synth", out.slope_max);
  read(s, "noise", "synth", out.noise_std);
  read(s, "domain_offset", "synth", out.domain_offset);
  read(s, "domain_freq_scale", "synth", out.domain_freq_scale);
  read(s, "seed", "synth", out.seed);
  if (s.contains("waveforms")) {
    const Json& w = s.at("waveforms");
    if (!w.is_array()) throw ConfigError("synth.waveforms", "expected an array of names");
    out.waveforms.clear();
    for (const auto& e : w) {
      if (!e.is_string()) throw ConfigError("synth.waveforms", "expected an array of names");
      try {
        out.waveforms.push_back(parse_waveform(e.get<std::string>()));
      } catch (const ContractViolation& ex) {
        throw ConfigError("synth.waveforms", ex.what());
      }
    }
  }
  return out;
}

}  // namespace

Json synth_to_json(const SynthSpec& s) {
  Json w = Json::array();
  for (auto f : s.waveforms) w.push_back(to_string(f));
  return Json{{"samples_per_domain", s.samples_per_domain},
              {"domains", s.domains},
              {"amplitude_levels", s.amplitude_levels},
              {"freq_min", s.freq_min},
              {"freq_max", s.freq_max},
              {"phase_min", s.phase_min},
              {"phase_max", s.phase_max},
              {"slope_min", s.slope_min},
              {"slope_max", s.slope_max},
              {"waveforms", w},
              {"noise", s.noise_std},
              {"domain_offset", s.domain_offset},
              {"domain_freq_scale", s.domain_freq_scale},
              {"seed", s.seed}};
}

RunConfig config_from_json(const Json& doc, RunConfig c) {
  check_keys(doc, "", {"schema", "model", "objective", "train", "eval", "paths", "synth"});
  if (doc.contains("schema")) {
    const Json& s = doc.at("schema");
    check_keys(s, "schema", {"t", "d", "k"});
    read(s, "t", "schema", c.schema.steps);
    read(s, "d", "schema", c.schema.channels);
    read(s, "k", "schema", c.schema.factors);
  }
  if (doc.contains("model")) {
    const Json& m = doc.at("model");
    check_keys(m, "model", {"latent", "segments", "hidden"});
    read(m, "latent", "model", c.model.latent);
    read(m, "segments", "model", c.model.segments);
    read(m, "hidden", "model", c.model.hidden);
  }
  if (doc.contains("objective")) {
    const Json& o = doc.at("objective");
    check_keys(o, "objective", {"mode", "alpha", "beta"});
    if (o.contains("mode")) {
      if (!o.at("mode").is_string()) throw ConfigError("objective.mode", "expected a string");
      try {
        c.mode = parse_objective_mode(o.at("mode").get<std::string>());
      } catch (const ContractViolation& e) {
        throw ConfigError("objective.mode", e.what());
      }
    }
    read(o, "alpha", "objective", c.alpha);
    read(o, "beta", "objective", c.beta);
  }
  if (doc.contains("train")) {
    const Json& t = doc.at("train");
    check_keys(t, "train", {"lr", "batch", "epochs", "seed", "clip", "lambda", "w_cls", "lambda_warmup", "log_samples"});
    read(t, "lr", "train", c.train.lr);
    read(t, "batch", "train", c.train.batch);
    read(t, "epochs", "train", c.train.epochs);
    read(t, "seed", "train", c.train.seed);
    read(t, "clip", "train", c.train.clip);
    read(t, "lambda", "train", c.train.lambda);
    read(t, "w_cls", "train", c.train.w_cls);
    read(t, "lambda_warmup", "train", c.train.lambda_warmup);
    read(t, "log_samples", "train", c.train.log_samples);
  }
  if (doc.contains("eval")) {
    const Json& e = doc.at("eval");
    check_keys(e, "eval", {"samples", "latent_bins", "factor_levels", "heldout_fraction", "seed"});
    read(e, "samples", "eval", c.eval.samples);
    read(e, "latent_bins", "eval", c.eval.latent_bins);
    read(e, "factor_levels", "eval", c.eval.factor_levels);
    read(e, "heldout_fraction", "eval", c.eval.heldout_fraction);
    read(e, "seed", "eval", c.eval.seed);
  }
  if (doc.contains("paths")) {
    const Json& p = doc.at("paths");
    check_keys(p, "paths", {"data", "factors", "target", "out", "ckpt", "input", "metrics"});
    read(p, "data", "paths", c.paths.data);
    read(p, "factors", "paths", c.paths.factors);
    read(p, "target", "paths", c.paths.target);
    read(p, "out", "paths", c.paths.out);
    read(p, "ckpt", "paths", c.paths.ckpt);
    read(p, "input", "paths", c.paths.input);
    read(p, "metrics", "paths", c.paths.metrics);
  }
  if (doc.contains("synth")) c.synth = synth_from_json(doc.at("synth"), c.synth.value_or(SynthSpec{}));
  return c;
}

Json config_to_json(const RunConfig& c) {
  Json doc{{"schema", {{"t", c.schema.steps}, {"d", c.schema.channels}, {"k", c.schema.factors}}},
           {"model", {{"latent", c.model.latent}, {"segments", c.model.segments}, {"hidden", c.model.hidden}}},
           {"objective", {{"mode", to_string(c.mode)}, {"alpha", c.alpha}, {"beta", c.beta}}},
           {"train",
            {{"lr", c.train.lr},
             {"batch", c.train.batch},
             {"epochs", c.train.epochs},
             {"seed", c.train.seed},
             {"clip", c.train.clip},
             {"lambda", c.train.lambda},
             {"w_cls", c.train.w_cls},
             {"lambda_warmup", c.train.lambda_warmup},
             {"log_samples", c.train.log_samples}}},
           {"eval",
            {{"samples", c.eval.samples},
             {"latent_bins", c.eval.latent_bins},
             {"factor_levels", c.eval.factor_levels},
             {"heldout_fraction", c.eval.heldout_fraction},
             {"seed", c.eval.seed}}},
           {"paths",
            {{"data", c.paths.data},
             {"factors", c.paths.factors},
             {"target", c.paths.target},
             {"out", c.paths.out},
             {"ckpt", c.paths.ckpt},
             {"input", c.paths.input},
             {"metrics", c.paths.metrics}}}};
  if (c.synth) doc["synth"] = synth_to_json(*c.synth);
  return doc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("--config", "'" + path + "' is not valid JSON (byte " + std::to_string(e.byte) + ")");
  }
  return config_from_json(doc);
}

std::vector<std::string> RunConfig::validate() const {
  positive(schema.steps >= 2, "schema.t", "must be >= 2");
  positive(schema.channels >= 1, "schema.d", "must be >= 1");
  positive(schema.factors >= 0, "schema.k", "must be >= 0");
  positive(model.latent >= 1, "model.latent", "must be >= 1");
  positive(model.hidden >= 1, "model.hidden", "must be >= 1");
  if (!model.segments.empty()) {
    Index total = 0;
    for (Index s : model.segments) {
      positive(s >= 1, "model.segments", "sizes must be >= 1");
      total += s;
    }
    positive(total == model.latent, "model.segments",
             "sizes sum to " + std::to_string(total) + " but model.latent is " + std::to_string(model.latent));
  }
  positive(finite(alpha), "objective.alpha", "must be finite");
  positive(finite(beta) && beta >= 0.0, "objective.beta", "must be finite and >= 0");
  positive(finite(train.lr) && train.lr > 0.0, "train.lr");
  positive(train.batch >= 2, "train.batch", "must be >= 2");
  positive(train.epochs >= 0, "train.epochs", "must be >= 0");
  positive(finite(train.clip), "train.clip", "must be finite");
  positive(finite(train.lambda) && train.lambda >= 0.0, "train.lambda", "must be finite and >= 0");
  positive(finite(train.w_cls) && train.w_cls >= 0.0, "train.w_cls", "must be finite and >= 0");
  positive(finite(train.lambda_warmup) && train.lambda_warmup >= 0.0, "train.lambda_warmup", "must be >= 0");
  positive(train.log_samples >= 1, "train.log_samples", "must be >= 1");
  positive(eval.samples >= 1, "eval.samples", "must be >= 1");
  positive(eval.latent_bins >= 2, "eval.latent_bins", "must be >= 2");
  positive(eval.factor_levels >= 2, "eval.factor_levels", "must be >= 2");
  positive(eval.heldout_fraction > 0.0 && eval.heldout_fraction < 1.0, "eval.heldout_fraction", "must be in (0, 1)");
  if (synth) {
    SynthSpec s = *synth;
    s.steps = schema.steps;
    positive(schema.channels == 1, "schema.d", "the synthetic generator emits one channel");
    try {
      s.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError("synth", e.what());
    }
  }
  std::vector<std::string> warnings;
  ObjectiveConfig obj = objective(2);
  try {
    for (auto& w : obj.validate()) warnings.push_back(w);
  } catch (const ContractViolation& e) {
    throw ConfigError("objective", e.what());
  }
  return warnings;
}

LatentSpec RunConfig::latent_spec() const {
  if (model.segments.empty() || model.segments.size() == 1) return LatentSpec::single(model.latent);
  if (model.segments.size() == 2) return LatentSpec::class_domain(model.segments[0], model.segments[1]);
  LatentSpec spec;
  for (std::size_t i = 0; i < model.segments.size(); ++i)
    spec.segments.push_back({"z" + std::to_string(i), model.segments[i]});
  return spec;
}

ObjectiveConfig RunConfig::objective(Index dataset_size) const {
  ObjectiveConfig o;
  o.mode = mode;
  o.alpha = alpha;
  o.beta = beta;
  o.dataset_size = dataset_size;
  return o;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.lr = train.lr;
  t.batch = train.batch;
  t.seed = train.seed;
  t.clip = train.clip;
  t.log_samples = train.log_samples;
  return t;
}

GroupHyper RunConfig::group_hyper() const {
  GroupHyper h;
  h.lambda = train.lambda;
  h.w_cls = train.w_cls;
  h.lambda_warmup = train.lambda_warmup > 0.0;
  if (h.lambda_warmup) h.warmup_epochs = train.lambda_warmup;
  return h;
}

}  // namespace dts
