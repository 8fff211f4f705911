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

#include "dts/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "dts/checkpoint.hpp"
#include "dts/data.hpp"
#include "dts/group.hpp"
#include "dts/metrics.hpp"
#include "dts/trainer.hpp"

namespace dts {

std::string progress_line(Index epoch, double loss, const DecompositionTerms& t) {
  std::ostringstream s;
  s << "epoch=" << epoch << " loss=" << format_double(loss) << " mi=" << format_double(t.index_code_mi)
    << " tc=" << format_double(t.total_correlation) << " dim_kl=" << format_double(t.dimension_kl)
    << " recon=" << format_double(t.recon_loglik);
  return s.str();
}

Json terms_to_json(const DecompositionTerms& t) {
  return Json{{"mi", t.index_code_mi},
              {"tc", t.total_correlation},
              {"dim_kl", t.dimension_kl},
              {"recon_loglik", t.recon_loglik},
              {"kl", t.kl_sum()}};
}

Json report_to_json(const MetricsReport& r, const Json& config_echo) {
  Json doc = Json::object();
  if (r.mig) doc["mig"] = *r.mig;
  if (r.decomposition) {
    doc["mi"] = r.decomposition->index_code_mi;
    doc["tc"] = r.decomposition->total_correlation;
    doc["dim_kl"] = r.decomposition->dimension_kl;
    doc["recon_loglik"] = r.decomposition->recon_loglik;
  }
  doc["active_units"] = r.active_units;
  if (!r.accuracies.empty()) doc["accuracies"] = r.accuracies;
  if (r.proxy_discrepancy) doc["proxy_discrepancy"] = *r.proxy_discrepancy;
  doc["config_echo"] = config_echo;
  if (!r.warnings.empty()) doc["warnings"] = r.warnings;
  return doc;
}

namespace {

const char* kUsageFooter =
    "Settings come from, in increasing precedence: built-in defaults, the --config JSON file,\n"
    "then command-line flags. Exit codes: 0 success, 1 user error, 2 numeric failure or corrupt input.";

/// Command-line overrides; unset members leave the config untouched.
struct Flags {
  std::optional<std::string> config, data, factors, target, out, ckpt, input, resume, mode;
  std::optional<double> alpha, beta, lr, clip, lambda, w_cls, lo, hi, offset, freq_scale, noise;
  std::optional<Index> epochs, batch, latent, hidden, steps, samples, domains;
  std::optional<std::uint64_t> seed;
  bool source_only = false;
};

RunConfig apply_flags(RunConfig c, const Flags& f) {
  if (f.data) c.paths.data = *f.data;
  if (f.factors) c.paths.factors = *f.factors;
  if (f.target) c.paths.target = *f.target;
  if (f.out) c.paths.out = *f.out;
  if (f.ckpt) c.paths.ckpt = *f.ckpt;
  if (f.input) c.paths.input = *f.input;
  if (f.mode) {
    try {
      c.mode = parse_objective_mode(*f.mode);
    } catch (const ContractViolation& e) {
      throw ConfigError("--mode", e.what());
    }
  }
  if (f.alpha) c.alpha = *f.alpha;
  if (f.beta) c.beta = *f.beta;
  if (f.lr) c.train.lr = *f.lr;
  if (f.clip) c.train.clip = *f.clip;
  if (f.lambda) c.train.lambda = *f.lambda;
  if (f.w_cls) c.train.w_cls = *f.w_cls;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.batch) c.train.batch = *f.batch;
  if (f.seed) c.train.seed = *f.seed;
  if (f.latent) {
    c.model.latent = *f.latent;
    c.model.segments.clear();
  }
  if (f.hidden) c.model.hidden = *f.hidden;
  return c;
}

RunConfig base_config(const Flags& f) { return f.config ? load_config(*f.config) : RunConfig{}; }

void require_path(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ConfigError(flag, "a path is required");
}

void warn_all(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

SeriesDataset load_data(const std::string& path, const CsvSchema& schema, const std::string& factors) {
  return load_csv(path, schema, factors.empty() ? std::nullopt : std::optional<std::string>(factors));
}

NormalizeResult normalized(const SeriesDataset& ds, const std::optional<NormStats>& stats, std::ostream& err) {
  NormalizeResult r = normalize(ds, stats);
  warn_all(r.warnings, err);
  return r;
}

void write_json(const Json& doc, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << doc.dump(2) << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw ContractViolation("cannot write '" + path + "'");
  f << doc.dump(2) << '\n';
}

/// Loads a checkpoint and, when a config file is given, checks that it
/// declares the same architecture.
Checkpoint checked_checkpoint(const Flags& f) {
  if (!f.ckpt) throw ConfigError("--ckpt", "a checkpoint path is required");
  Checkpoint ck = load_checkpoint(*f.ckpt);
  if (f.config) {
    RunConfig declared = apply_flags(load_config(*f.config), f);
    declared.validate();
    check_compatible(ck, declared);
  }
  return ck;
}

CsvSchema schema_for(const Checkpoint& ck, const Flags& f) {
  CsvSchema s = ck.config.schema;
  if (f.config) s = load_config(*f.config).schema;
  return s;
}

// ---- subcommands -------------------------------------------------------------------

int cmd_generate(const Flags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = apply_flags(base_config(f), f);
  SynthSpec spec = c.synth.value_or(SynthSpec{});
  spec.steps = c.schema.steps;
  if (f.seed) spec.seed = *f.seed;
  if (f.samples) spec.samples_per_domain = *f.samples;
  if (f.domains) spec.domains = *f.domains;
  if (f.offset) spec.domain_offset = *f.offset;
  if (f.freq_scale) spec.domain_freq_scale = *f.freq_scale;
  if (f.noise) spec.noise_std = *f.noise;
  c.synth = spec;
  warn_all(c.validate(), err);
  require_path(c.paths.out, "--out");
  const SeriesDataset ds = synth_generate(spec);
  write_csv(ds, c.paths.out);
  if (!c.paths.factors.empty()) write_factors_csv(ds, c.paths.factors);
  out << "generated " << ds.size() << " windows -> " << c.paths.out << '\n';
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::optional<Checkpoint> resumed;
  Index epochs = 0;
  if (f.resume) {
    resumed = load_checkpoint(*f.resume);
    if (resumed->kind != ModelKind::Individual)
      throw IntegrityError("cannot resume a checkpoint of kind " + to_string(resumed->kind) + " with train");
    c = resumed->config;
    const RunConfig run = apply_flags(c, f);
    run.validate();
    epochs = run.train.epochs;
    c.paths = run.paths;
  } else {
    c = apply_flags(base_config(f), f);
    warn_all(c.validate(), err);
    epochs = c.train.epochs;
  }
  require_path(c.paths.data, "--data");
  require_path(c.paths.out, "--out");

  const SeriesDataset raw = load_data(c.paths.data, c.schema, c.paths.factors);
  require(raw.size() >= 2, "training needs at least two windows");
  const NormalizeResult norm = normalized(raw, resumed ? resumed->norm : std::nullopt, err);

  VaeModel model = resumed ? restore_individual(*resumed)
                           : VaeModel::init(c.schema.channels, c.model.hidden, c.latent_spec(), c.train.seed);
  TrainState state = resumed ? resumed->state : TrainState{};
  RunConfig echo = resumed ? resumed->config : c;

  auto progress = [&](const EpochLog& log) { out << progress_line(log.epoch, log.loss, log.terms) << std::endl; };
  try {
    train_individual(model, state, norm.data, c.objective(norm.data.size()), c.train_config(), epochs, progress);
  } catch (const NumericFailure&) {
    save_checkpoint(make_checkpoint(model, echo, state, norm.stats), c.paths.out);
    err << "last good checkpoint (epoch " << state.epoch << ") written to " << c.paths.out << '\n';
    throw;
  }
  save_checkpoint(make_checkpoint(model, echo, state, norm.stats), c.paths.out);
  return kExitOk;
}

int cmd_adapt(const Flags& f, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::optional<Checkpoint> resumed;
  Index epochs = 0;
  if (f.resume) {
    resumed = load_checkpoint(*f.resume);
    if (resumed->kind != ModelKind::Group)
      throw IntegrityError("cannot resume a checkpoint of kind " + to_string(resumed->kind) + " with adapt");
    c = resumed->config;
    const RunConfig run = apply_flags(c, f);
    run.validate();
    epochs = run.train.epochs;
    c.paths = run.paths;
  } else {
    c = apply_flags(base_config(f), f);
    warn_all(c.validate(), err);
    epochs = c.train.epochs;
    const LatentSpec spec = c.latent_spec();
    if (spec.segments.size() != 2 || spec.segments[0].size != spec.segments[1].size)
      throw ConfigError("model.segments", "adapt needs two equal segments (z_y, z_d)");
  }
  c.group_hyper().validate();
  require_path(c.paths.data, "--data");
  require_path(c.paths.out, "--out");

  const SeriesDataset raw = load_data(c.paths.data, c.schema, c.paths.factors);
  SeriesDataset source, target;
  if (!c.paths.target.empty()) {
    source = raw;
    target = load_data(c.paths.target, c.schema, "");
  } else {
    require(raw.has_domains(), "adapt data needs a domain column");
    source = raw.domain_rows(0);
    target = raw.domain_rows(1);
  }
  require(source.size() >= 1, "adapt needs source-domain rows (domain 0)");
  require(source.has_labels(), "adapt needs class labels on source rows");
  if (!f.source_only) require(target.size() >= 1, "adapt needs target-domain rows (domain 1)");

  std::optional<NormStats> stats = resumed ? resumed->norm : std::nullopt;
  if (!stats) stats = channel_stats(source);
  const SeriesDataset src = normalized(source, stats, err).data;
  const SeriesDataset tgt = target.size() > 0 ? normalized(target, stats, err).data : target;

  const Index classes = resumed ? resumed->classes : std::max<Index>(2, src.label_cardinality());
  GroupModel model = resumed ? restore_group(*resumed)
                             : GroupModel::init(c.schema.channels, c.model.hidden, c.latent_spec(), classes, 2,
                                                c.train.seed);
  TrainState state = resumed ? resumed->state : TrainState{};
  RunConfig echo = resumed ? resumed->config : c;

  auto progress = [&](const AdaptEpochLog& log) { out << progress_line(log.epoch, log.total, log.terms) << std::endl; };
  const Index n = f.source_only ? src.size() : src.size() + tgt.size();
  try {
    if (f.source_only)
      train_source_only(model, state, src, c.objective(n), c.train_config(), c.group_hyper(), epochs, progress);
    else
      adapt_train(model, state, src, tgt, c.objective(n), c.train_config(), c.group_hyper(), epochs, progress);
  } catch (const NumericFailure&) {
    save_checkpoint(make_checkpoint(model, echo, state, stats), c.paths.out);
    err << "last good checkpoint (epoch " << state.epoch << ") written to " << c.paths.out << '\n';
    throw;
  }
  save_checkpoint(make_checkpoint(model, echo, state, stats), c.paths.out);
  return kExitOk;
}

/// Model of either kind; `vae` points into whichever is held.
struct LoadedModel {
  std::optional<VaeModel> individual;
  std::optional<GroupModel> group;
  VaeModel& vae() { return group ? group->core : *individual; }
};

LoadedModel restore(const Checkpoint& ck) {
  LoadedModel m;
  if (ck.kind == ModelKind::Group)
    m.group = restore_group(ck);
  else
    m.individual = restore_individual(ck);
  return m;
}

int cmd_traverse(const Flags& f, std::ostream& out, std::ostream& err) {
  if (!f.input) throw ConfigError("--input", "a seed-window CSV is required");
  if (!f.out) throw ConfigError("--out", "an output path is required");
  const double lo = f.lo.value_or(-4.0), hi = f.hi.value_or(4.0);
  const Index steps = f.steps.value_or(9);
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) throw ConfigError("--lo/--hi", "need finite lo < hi");
  if (steps < 2) throw ConfigError("--steps", "must be >= 2");
  const Checkpoint ck = checked_checkpoint(f);
  LoadedModel m = restore(ck);
  CsvSchema schema = schema_for(ck, f);
  schema.factors = 0;
  const SeriesDataset seeds = normalized(load_data(*f.input, schema, ""), ck.norm, err).data;
  TraversalSet set = traverse(m.vae(), seeds.windows, seeds.ids, seeds.steps, lo, hi, steps);
  if (ck.norm) {
    for (Index r = 0; r < set.series.rows(); ++r)
      for (Index t = 0; t < set.steps; ++t)
        for (Index ch = 0; ch < set.channels; ++ch) {
          double& v = set.series(r, t * set.channels + ch);
          v = v * ck.norm->std[ch] + ck.norm->mean[ch];
        }
  }
  write_traversal_csv(set, *f.out);
  out << "wrote " << set.count() << " series -> " << *f.out << '\n';
  return kExitOk;
}

int cmd_eval(const Flags& f, std::ostream& out, std::ostream& err) {
  if (!f.data) throw ConfigError("--data", "a dataset path is required");
  const Checkpoint ck = checked_checkpoint(f);
  RunConfig c = f.config ? apply_flags(load_config(*f.config), f) : apply_flags(ck.config, f);
  if (f.seed) c.eval.seed = *f.seed;
  if (f.samples) c.eval.samples = *f.samples;
  c.validate();
  CsvSchema schema = schema_for(ck, f);
  if (!f.factors) schema.factors = 0;
  LoadedModel m = restore(ck);
  const SeriesDataset ds = normalized(load_data(*f.data, schema, f.factors.value_or("")), ck.norm, err).data;
  const MetricsReport rep = m.group ? evaluate(*m.group, ds, c.eval) : evaluate(*m.individual, ds, c.eval);
  warn_all(rep.warnings, err);
  write_json(report_to_json(rep, config_to_json(ck.config)), f.out.value_or(""), out);
  return kExitOk;
}

int cmd_decompose(const Flags& f, std::ostream& out, std::ostream& err) {
  if (!f.data) throw ConfigError("--data", "a dataset path is required");
  const Checkpoint ck = checked_checkpoint(f);
  const Index samples = f.samples.value_or(ck.config.eval.samples);
  if (samples < 1) throw ConfigError("--samples", "must be >= 1");
  CsvSchema schema = schema_for(ck, f);
  schema.factors = 0;
  LoadedModel m = restore(ck);
  const SeriesDataset ds = normalized(load_data(*f.data, schema, ""), ck.norm, err).data;
  require(ds.size() >= 2, "decomposition needs at least two windows");
  const PosteriorValues post = encode_values(m.vae(), ds.windows, ds.steps);
  const std::uint64_t seed = f.seed.value_or(ck.config.eval.seed);
  const DecompositionTerms t =
      decompose_dataset(post, samples, CounterRng(seed).split({41}), 512, &m.vae(), &ds.windows, ds.steps);
  write_json(terms_to_json(t), f.out.value_or(""), out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dts: disentangled time-series representation laboratory", "dts"};
  app.footer(kUsageFooter);
  app.require_subcommand(1, 1);
  Flags f;

  auto common = [&](CLI::App* s) { s->add_option("--config", f.config, "run configuration JSON"); };
  auto training = [&](CLI::App* s) {
    common(s);
    s->add_option("--data", f.data, "dataset CSV (paths.data)");
    s->add_option("--factors", f.factors, "factors CSV (paths.factors)");
    s->add_option("--out", f.out, "checkpoint to write (paths.out)");
    s->add_option("--resume", f.resume, "continue from this checkpoint");
    s->add_option("--epochs", f.epochs, "epochs to run (train.epochs)");
    s->add_option("--seed", f.seed, "train.seed");
    s->add_option("--lr", f.lr, "train.lr");
    s->add_option("--batch", f.batch, "train.batch");
    s->add_option("--clip", f.clip, "train.clip");
    s->add_option("--mode", f.mode, "objective.mode: vanilla | beta | dts");
    s->add_option("--alpha", f.alpha, "objective.alpha");
    s->add_option("--beta", f.beta, "objective.beta");
    s->add_option("--latent", f.latent, "model.latent (single segment)");
    s->add_option("--hidden", f.hidden, "model.hidden");
  };

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic factor corpus as CSV");
  common(gen);
  gen->add_option("--out", f.out, "dataset CSV to write");
  gen->add_option("--factors", f.factors, "factors CSV to write");
  gen->add_option("--seed", f.seed, "synth.seed");
  gen->add_option("--samples", f.samples, "synth.samples_per_domain");
  gen->add_option("--domains", f.domains, "synth.domains (1 or 2)");
  gen->add_option("--offset", f.offset, "synth.domain_offset");
  gen->add_option("--freq-scale", f.freq_scale, "synth.domain_freq_scale");
  gen->add_option("--noise", f.noise, "synth.noise");

  CLI::App* train = app.add_subcommand("train", "train an individual-latent model");
  training(train);

  CLI::App* adapt = app.add_subcommand("adapt", "group-segment adversarial training on source + target domains");
  training(adapt);
  adapt->add_option("--target", f.target, "target-domain CSV (default: domain-1 rows of --data)");
  adapt->add_option("--lambda", f.lambda, "train.lambda");
  adapt->add_option("--w-cls", f.w_cls, "train.w_cls");
  adapt->add_flag("--source-only", f.source_only, "baseline: source rows and class head only");

  CLI::App* trav = app.add_subcommand("traverse", "export latent traversals as CSV");
  common(trav);
  trav->add_option("--ckpt", f.ckpt, "checkpoint");
  trav->add_option("--input", f.input, "seed windows CSV");
  trav->add_option("--lo", f.lo, "grid start (default -4)");
  trav->add_option("--hi", f.hi, "grid end (default 4)");
  trav->add_option("--steps", f.steps, "grid size (default 9)");
  trav->add_option("--out", f.out, "traversal CSV to write");

  CLI::App* ev = app.add_subcommand("eval", "write a metrics report");
  common(ev);
  ev->add_option("--ckpt", f.ckpt, "checkpoint");
  ev->add_option("--data", f.data, "dataset CSV");
  ev->add_option("--factors", f.factors, "factors CSV");
  ev->add_option("--out", f.out, "metrics JSON (default: stdout)");
  ev->add_option("--seed", f.seed, "eval.seed");
  ev->add_option("--samples", f.samples, "eval.samples");

  CLI::App* dec = app.add_subcommand("decompose", "report MI / TC / dimension-wise KL over a dataset");
  common(dec);
  dec->add_option("--ckpt", f.ckpt, "checkpoint");
  dec->add_option("--data", f.data, "dataset CSV");
  dec->add_option("--out", f.out, "terms JSON (default: stdout)");
  dec->add_option("--seed", f.seed, "eval.seed");
  dec->add_option("--samples", f.samples, "eval.samples");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUserError;
  }

  try {
    if (gen->parsed()) return cmd_generate(f, out, err);
    if (train->parsed()) return cmd_train(f, out, err);
    if (adapt->parsed()) return cmd_adapt(f, out, err);
    if (trav->parsed()) return cmd_traverse(f, out, err);
    if (ev->parsed()) return cmd_eval(f, out, err);
    return cmd_decompose(f, out, err);
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumericFailure;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitNumericFailure;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << '\n';
    return kExitUserError;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << '\n';
    return kExitUserError;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace dts
