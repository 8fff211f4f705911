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

#include "dts/checkpoint.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace dts {

std::string to_string(ModelKind k) { return k == ModelKind::Individual ? "individual" : "group"; }

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json matrix_to_json(const RowMatrix& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

RowMatrix matrix_from_json(const Json& j, Index rows, Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows)
    throw IntegrityError(what + ": expected " + std::to_string(rows) + " rows");
  RowMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Json& row = j[r];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw IntegrityError(what + ": row " + std::to_string(r) + " does not have " + std::to_string(cols) + " values");
    for (Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw IntegrityError(what + ": non-numeric entry");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

std::vector<Parameter> snapshot(const std::vector<Parameter*>& ps) {
  std::vector<Parameter> out;
  for (const Parameter* p : ps) out.emplace_back(p->name, p->value);
  return out;
}

void copy_into(const std::vector<Parameter*>& dst, const std::vector<Parameter>& src) {
  if (dst.size() != src.size())
    throw IntegrityError("checkpoint holds " + std::to_string(src.size()) + " parameter arrays, model expects " +
                         std::to_string(dst.size()));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->name != src[i].name)
      throw IntegrityError("checkpoint parameter '" + src[i].name + "' found where '" + dst[i]->name + "' expected");
    if (dst[i]->value.rows() != src[i].value.rows() || dst[i]->value.cols() != src[i].value.cols())
      throw IntegrityError("parameter '" + dst[i]->name + "' has shape [" + std::to_string(src[i].value.rows()) +
                           ", " + std::to_string(src[i].value.cols()) + "] in the checkpoint, model expects [" +
                           std::to_string(dst[i]->value.rows()) + ", " + std::to_string(dst[i]->value.cols()) + "]");
    dst[i]->value = src[i].value;
    dst[i]->zero_grad();
  }
}

std::string segments_text(const LatentSpec& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.segments.size(); ++i) out += (i ? "," : "") + std::to_string(s.segments[i].size);
  return out + ")";
}

}  // namespace

Checkpoint make_checkpoint(VaeModel& model, const RunConfig& cfg, const TrainState& state,
                           const std::optional<NormStats>& norm) {
  Checkpoint c;
  c.kind = ModelKind::Individual;
  c.config = cfg;
  c.channels = model.channels;
  c.params = snapshot(model.params());
  c.norm = norm;
  c.rng_key = cfg.train.seed;
  c.state = state;
  c.timestamp = utc_now();
  return c;
}

Checkpoint make_checkpoint(GroupModel& model, const RunConfig& cfg, const TrainState& state,
                           const std::optional<NormStats>& norm) {
  Checkpoint c = make_checkpoint(model.core, cfg, state, norm);
  c.kind = ModelKind::Group;
  c.classes = model.class_head.classes();
  c.params = snapshot(model.params());
  return c;
}

VaeModel restore_individual(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::Individual)
    throw IntegrityError("checkpoint holds a " + to_string(ckpt.kind) + " model, an individual model is required");
  VaeModel m = VaeModel::init(ckpt.channels, ckpt.config.model.hidden, ckpt.config.latent_spec(), ckpt.rng_key);
  copy_into(m.params(), ckpt.params);
  return m;
}

GroupModel restore_group(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::Group)
    throw IntegrityError("checkpoint holds a " + to_string(ckpt.kind) + " model, a group model is required");
  const LatentSpec spec = ckpt.config.latent_spec();
  if (spec.segments.size() != 2) throw IntegrityError("group checkpoint without two latent segments");
  GroupModel m = GroupModel::init(ckpt.channels, ckpt.config.model.hidden, spec, ckpt.classes, 2, ckpt.rng_key);
  copy_into(m.params(), ckpt.params);
  return m;
}

void check_compatible(const Checkpoint& ckpt, const RunConfig& cfg) {
  const LatentSpec have = ckpt.config.latent_spec(), want = cfg.latent_spec();
  if (have.total() != want.total() || have.segments.size() != want.segments.size() ||
      !std::equal(have.segments.begin(), have.segments.end(), want.segments.begin(),
                  [](const auto& a, const auto& b) { return a.size == b.size; }))
    throw IntegrityError("latent segments mismatch: checkpoint has " + segments_text(have) + ", config declares " +
                         segments_text(want));
  if (ckpt.config.model.hidden != cfg.model.hidden)
    throw IntegrityError("hidden size mismatch: checkpoint has " + std::to_string(ckpt.config.model.hidden) +
                         ", config declares " + std::to_string(cfg.model.hidden));
  if (ckpt.config.schema.steps != cfg.schema.steps || ckpt.channels != cfg.schema.channels)
    throw IntegrityError("schema mismatch: checkpoint has t=" + std::to_string(ckpt.config.schema.steps) +
                         " d=" + std::to_string(ckpt.channels) + ", config declares t=" +
                         std::to_string(cfg.schema.steps) + " d=" + std::to_string(cfg.schema.channels));
}

Json checkpoint_to_json(const Checkpoint& c) {
  Json params = Json::array();
  for (const auto& p : c.params)
    params.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"data", matrix_to_json(p.value)}});
  Json adam{{"lr", c.state.adam.hyper.lr},
            {"beta1", c.state.adam.hyper.beta1},
            {"beta2", c.state.adam.hyper.beta2},
            {"eps", c.state.adam.hyper.eps},
            {"step", c.state.adam.step},
            {"m", Json::array()},
            {"v", Json::array()}};
  for (const auto& m : c.state.adam.m) adam["m"].push_back(matrix_to_json(m));
  for (const auto& v : c.state.adam.v) adam["v"].push_back(matrix_to_json(v));
  Json doc{{"format_version", c.format_version},
           {"kind", to_string(c.kind)},
           {"config", config_to_json(c.config)},
           {"channels", c.channels},
           {"classes", c.classes},
           {"params", params},
           {"rng", {{"key", c.rng_key}, {"epoch", c.state.epoch}}},
           {"epoch", c.state.epoch},
           {"optimizer", adam},
           {"timestamp", c.timestamp}};
  if (c.norm) doc["norm"] = {{"mean", vector_to_json(c.norm->mean)}, {"std", vector_to_json(c.norm->std)}};
  return doc;
}

Checkpoint checkpoint_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("format_version") || !doc["format_version"].is_number_integer())
    throw IntegrityError("not a checkpoint: missing format_version");
  Checkpoint c;
  c.format_version = doc["format_version"].get<int>();
  if (c.format_version > kCheckpointVersion)
    throw IntegrityError("checkpoint format version " + std::to_string(c.format_version) +
                         " is newer than supported version " + std::to_string(kCheckpointVersion));
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "individual")
      c.kind = ModelKind::Individual;
    else if (kind == "group")
      c.kind = ModelKind::Group;
    else
      throw IntegrityError("unknown model kind '" + kind + "'");
    c.config = config_from_json(doc.at("config"));
    c.channels = doc.at("channels").get<Index>();
    c.classes = doc.at("classes").get<Index>();
    c.rng_key = doc.at("rng").at("key").get<std::uint64_t>();
    c.state.epoch = doc.at("epoch").get<Index>();
    c.timestamp = doc.at("timestamp").get<std::string>();
    for (const auto& p : doc.at("params")) {
      const std::string name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<std::vector<Index>>();
      if (shape.size() != 2) throw IntegrityError("parameter '" + name + "' shape must have two entries");
      c.params.emplace_back(name, matrix_from_json(p.at("data"), shape[0], shape[1], "parameter '" + name + "'"));
    }
    const Json& a = doc.at("optimizer");
    c.state.adam.hyper.lr = a.at("lr").get<double>();
    c.state.adam.hyper.beta1 = a.at("beta1").get<double>();
    c.state.adam.hyper.beta2 = a.at("beta2").get<double>();
    c.state.adam.hyper.eps = a.at("eps").get<double>();
    c.state.adam.step = a.at("step").get<long>();
    const auto& ms = a.at("m");
    const auto& vs = a.at("v");
    if (ms.size() > c.params.size() || vs.size() != ms.size())
      throw IntegrityError("optimizer moments do not align with the parameter arrays");
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const auto& v = c.params[i].value;
      c.state.adam.m.push_back(matrix_from_json(ms[i], v.rows(), v.cols(), "optimizer moment m"));
      c.state.adam.v.push_back(matrix_from_json(vs[i], v.rows(), v.cols(), "optimizer moment v"));
    }
    if (doc.contains("norm"))
      c.norm = NormStats{vector_from_json(doc["norm"].at("mean")), vector_from_json(doc["norm"].at("std"))};
  } catch (const Json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint config echo: ") + e.what());
  }
  if (c.norm && (c.norm->mean.size() != c.channels || c.norm->std.size() != c.channels))
    throw IntegrityError("normalization statistics do not match the channel count");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string text = checkpoint_to_json(ckpt).dump(1);
  std::ofstream out(path);
  if (!out) throw ContractViolation("cannot write checkpoint '" + path + "'");
  out << text << '\n';
  if (!out) throw ContractViolation("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open checkpoint '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError("checkpoint '" + path + "' is not valid JSON at byte " + std::to_string(e.byte),
                     static_cast<long>(e.byte));
  }
  return checkpoint_from_json(doc);
}

}  // namespace dts
