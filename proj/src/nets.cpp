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

#include "dts/nets.hpp"

#include <algorithm>
#include <cmath>

namespace dts {

namespace {

RowMatrix uniform_matrix(Index rows, Index cols, double bound, CounterRng& rng) {
  RowMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

// ---- layers -----------------------------------------------------------------

Linear Linear::init(Index in, Index out, CounterRng& rng, const std::string& name) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = Parameter(name + ".weight", uniform_matrix(in, out, k, rng));
  l.bias = Parameter(name + ".bias", uniform_matrix(1, out, k, rng));
  return l;
}

Tensor Linear::operator()(Graph& g, const Tensor& x) {
  require(x.shape().size() == 2 && x.dim(1) == in(),
          "linear layer '" + weight.name + "' expects width " + std::to_string(in()) + ", got " +
              to_string(x.shape()));
  return matmul(x, g.param(weight)) + g.param(bias);
}

GruParams GruParams::init(Index input_size, Index hidden_size, CounterRng& rng, const std::string& name) {
  require(input_size > 0 && hidden_size > 0, "GRU sizes must be positive");
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  GruParams p;
  p.w_in = Parameter(name + ".w_in", uniform_matrix(input_size, 3 * hidden_size, k, rng));
  p.b_in = Parameter(name + ".b_in", uniform_matrix(1, 3 * hidden_size, k, rng));
  p.w_hid = Parameter(name + ".w_hid", uniform_matrix(hidden_size, 3 * hidden_size, k, rng));
  p.b_hid = Parameter(name + ".b_hid", uniform_matrix(1, 3 * hidden_size, k, rng));
  return p;
}

// r = s(xr + h Wr + br), u = s(xu + h Wu + bu), n = tanh(xn + r * (h Wn + bn)),
// h' = (1 - u) * n + u * h
Tensor gru_cell(Graph& g, const Tensor& x_proj, Index row_offset, const Tensor& h, const Tensor& w_hid,
                const Tensor& b_hid) {
  const Index B = h.dim(0), H = h.dim(1);
  require(w_hid.dim(0) == H && w_hid.dim(1) == 3 * H && b_hid.size() == 3 * H,
          "gru_cell weight shapes inconsistent with hidden size " + std::to_string(H));
  require(x_proj.dim(1) == 3 * H && row_offset >= 0 && row_offset + B <= x_proj.dim(0),
          "gru_cell input projection shape " + to_string(x_proj.shape()) + " incompatible");

  const auto xp = x_proj.matrix().middleRows(row_offset, B);
  const auto hv = h.matrix();
  RowMatrix gh = hv * w_hid.matrix();
  gh.rowwise() += b_hid.matrix().row(0);

  Array r(B * H), u(B * H), n(B * H), hn(B * H), out(B * H);
  for (Index b = 0; b < B; ++b) {
    for (Index j = 0; j < H; ++j) {
      const Index k = b * H + j;
      const double rv = sigmoid_scalar(xp(b, j) + gh(b, j));
      const double uv = sigmoid_scalar(xp(b, H + j) + gh(b, H + j));
      const double hnv = gh(b, 2 * H + j);
      const double nv = std::tanh(xp(b, 2 * H + j) + rv * hnv);
      r[k] = rv;
      u[k] = uv;
      n[k] = nv;
      hn[k] = hnv;
      out[k] = (1.0 - uv) * nv + uv * hv(b, j);
    }
  }
  return g.record(
      "gru_cell", {B, H}, std::move(out), {x_proj.id(), h.id(), w_hid.id(), b_hid.id()},
      [B, H, row_offset](Graph& gr, int self) {
        const auto& in = gr.inputs(self);
        const auto& sv = gr.saved(self);
        const Array &r = sv[0], &u = sv[1], &n = sv[2], &hn = sv[3];
        const Array& go = gr.out_grad(self);
        const Array& hv = gr.value(in[1]);
        RowMatrix dgh(B, 3 * H);  // d(h W_hid + b_hid)
        RowMatrix dxp(B, 3 * H);
        Array dh_direct(B * H);
        for (Index b = 0; b < B; ++b) {
          for (Index j = 0; j < H; ++j) {
            const Index k = b * H + j;
            const double gk = go[k];
            const double dn = gk * (1.0 - u[k]);
            const double du = gk * (hv[k] - n[k]);
            dh_direct[k] = gk * u[k];
            const double dan = dn * (1.0 - n[k] * n[k]);
            const double dr = dan * hn[k];
            const double dau = du * u[k] * (1.0 - u[k]);
            const double dar = dr * r[k] * (1.0 - r[k]);
            dxp(b, j) = dar;
            dxp(b, H + j) = dau;
            dxp(b, 2 * H + j) = dan;
            dgh(b, j) = dar;
            dgh(b, H + j) = dau;
            dgh(b, 2 * H + j) = dan * r[k];
          }
        }
        if (gr.needs_grad(in[0])) {
          Array& dx = gr.grad_buffer(in[0]);
          MatrixMap(dx.data(), dx.size() / (3 * H), 3 * H).middleRows(row_offset, B) += dxp;
        }
        if (gr.needs_grad(in[1])) {
          const ConstMatrixMap w(gr.value(in[2]).data(), H, 3 * H);
          Array& dh = gr.grad_buffer(in[1]);
          MatrixMap dhm(dh.data(), B, H);
          dhm += MatrixMap(dh_direct.data(), B, H);
          dhm.noalias() += dgh * w.transpose();
        }
        if (gr.needs_grad(in[2])) {
          MatrixMap(gr.grad_buffer(in[2]).data(), H, 3 * H).noalias() +=
              ConstMatrixMap(hv.data(), B, H).transpose() * dgh;
        }
        if (gr.needs_grad(in[3])) {
          MatrixMap(gr.grad_buffer(in[3]).data(), 1, 3 * H) += dgh.colwise().sum();
        }
      },
      {std::move(r), std::move(u), std::move(n), std::move(hn)});
}

namespace {

void check_h0(const GruParams& p, const Tensor& h0, Index batch) {
  require(h0.shape().size() == 2 && h0.dim(0) == batch && h0.dim(1) == p.hidden_size(),
          "GRU initial state shape " + to_string(h0.shape()) + " mismatches batch " + std::to_string(batch) +
              " x hidden " + std::to_string(p.hidden_size()));
}

}  // namespace

std::vector<Tensor> gru_forward(Graph& g, GruParams& p, const Tensor& inputs, const Tensor& h0) {
  require(inputs.shape().size() == 3, "gru_forward expects time-major [T, B, D] input, got " +
                                          to_string(inputs.shape()));
  const Index T = inputs.dim(0), B = inputs.dim(1), D = inputs.dim(2);
  require(T >= 1, "gru_forward needs at least one step");
  require(D == p.input_size(), "gru_forward input width " + std::to_string(D) + " != " +
                                   std::to_string(p.input_size()));
  check_h0(p, h0, B);
  const Tensor x_proj = matmul(reshape(inputs, {T * B, D}), g.param(p.w_in)) + g.param(p.b_in);
  const Tensor w = g.param(p.w_hid), b = g.param(p.b_hid);
  std::vector<Tensor> states;
  states.reserve(T);
  Tensor h = h0;
  for (Index t = 0; t < T; ++t) {
    h = gru_cell(g, x_proj, t * B, h, w, b);
    states.push_back(h);
  }
  return states;
}

std::vector<Tensor> gru_forward_repeated(Graph& g, GruParams& p, const Tensor& input, Index steps,
                                         const Tensor& h0) {
  require(steps >= 1, "gru_forward needs at least one step");
  require(input.shape().size() == 2 && input.dim(1) == p.input_size(),
          "gru input shape " + to_string(input.shape()) + " mismatches width " + std::to_string(p.input_size()));
  check_h0(p, h0, input.dim(0));
  const Tensor x_proj = matmul(input, g.param(p.w_in)) + g.param(p.b_in);
  const Tensor w = g.param(p.w_hid), b = g.param(p.b_hid);
  std::vector<Tensor> states;
  states.reserve(steps);
  Tensor h = h0;
  for (Index t = 0; t < steps; ++t) {
    h = gru_cell(g, x_proj, 0, h, w, b);
    states.push_back(h);
  }
  return states;
}

// ---- encoder / decoder ----------------------------------------------------------

EncoderParams EncoderParams::init(Index channels, Index hidden, const LatentSpec& latent, CounterRng& rng) {
  latent.validate();
  EncoderParams e;
  e.latent = latent;
  CounterRng trunk_rng = rng.split({1});
  e.trunk = GruParams::init(channels, hidden, trunk_rng, "encoder.trunk");
  for (std::size_t i = 0; i < latent.segments.size(); ++i) {
    CounterRng head_rng = rng.split({2, i});
    e.heads.push_back(Linear::init(hidden, 2 * latent.segments[i].size, head_rng,
                                   "encoder.head." + latent.segments[i].name));
  }
  return e;
}

std::vector<Parameter*> EncoderParams::params() {
  auto out = trunk.params();
  for (auto& h : heads) {
    auto hp = h.params();
    out.insert(out.end(), hp.begin(), hp.end());
  }
  return out;
}

DecoderParams DecoderParams::init(Index latent, Index hidden, Index channels, CounterRng& rng) {
  DecoderParams d;
  CounterRng a = rng.split({1}), b = rng.split({2}), c = rng.split({3});
  d.to_hidden = Linear::init(latent, hidden, a, "decoder.to_hidden");
  d.gru = GruParams::init(latent, hidden, b, "decoder.gru");
  d.readout = Linear::init(hidden, channels, c, "decoder.readout");
  return d;
}

std::vector<Parameter*> DecoderParams::params() {
  std::vector<Parameter*> out = to_hidden.params();
  for (auto* p : gru.params()) out.push_back(p);
  for (auto* p : readout.params()) out.push_back(p);
  return out;
}

ClassifierParams ClassifierParams::init(Index in, Index classes, CounterRng& rng, const std::string& name) {
  require(classes >= 2, "classifier needs at least two classes");
  return ClassifierParams{Linear::init(in, classes, rng, name)};
}

GaussianPosterior encode(Graph& g, EncoderParams& e, const Tensor& batch) {
  require(batch.shape().size() == 3 && batch.dim(1) > 0, "encode expects a nonempty [T, B, D] batch");
  const Index B = batch.dim(1);
  const Tensor h0 = g.constant({B, e.trunk.hidden_size()}, Array::Zero(B * e.trunk.hidden_size()));
  const Tensor last = gru_forward(g, e.trunk, batch, h0).back();
  std::vector<Tensor> means, log_stds;
  for (std::size_t i = 0; i < e.heads.size(); ++i) {
    const Index size = e.latent.segments[i].size;
    const Tensor out = e.heads[i](g, last);
    means.push_back(slice(out, 1, 0, size));
    log_stds.push_back(clamp(slice(out, 1, size, size), kLogStdMin, kLogStdMax));
  }
  if (means.size() == 1) return {means[0], log_stds[0]};
  return {concat(means, 1), concat(log_stds, 1)};
}

Tensor reparameterize(Graph& g, const GaussianPosterior& post, const RowMatrix& noise) {
  require(noise.rows() == post.mean.dim(0) && noise.cols() == post.mean.dim(1),
          "noise shape [" + std::to_string(noise.rows()) + ", " + std::to_string(noise.cols()) +
              "] mismatches posterior " + to_string(post.mean.shape()));
  return post.mean + exp(post.log_std) * g.constant(noise);
}

Tensor decode(Graph& g, DecoderParams& d, const Tensor& z, Index steps) {
  require(steps >= 1, "decode needs at least one step");
  require(z.shape().size() == 2 && z.dim(1) == d.latent_size(),
          "decode latent shape " + to_string(z.shape()) + " mismatches width " + std::to_string(d.latent_size()));
  const Index B = z.dim(0), D = d.channels();
  const Tensor h0 = d.to_hidden(g, z);
  const auto states = gru_forward_repeated(g, d.gru, z, steps, h0);
  const Tensor stacked = concat(states, 0);  // [T*B, H]
  return reshape(d.readout(g, stacked), {steps, B, D});
}

Tensor classify(Graph& g, ClassifierParams& c, const Tensor& z_segment) {
  require(z_segment.shape().size() == 2 && z_segment.dim(1) == c.in(),
          "classifier expects segment width " + std::to_string(c.in()) + ", got " + to_string(z_segment.shape()));
  return c.layer(g, z_segment);
}

VaeModel VaeModel::init(Index channels, Index hidden, const LatentSpec& latent, std::uint64_t seed) {
  require(channels > 0 && hidden > 0, "model sizes must be positive");
  CounterRng root(seed);
  CounterRng enc_rng = root.split({101}), dec_rng = root.split({102});
  VaeModel m;
  m.channels = channels;
  m.hidden = hidden;
  m.encoder = EncoderParams::init(channels, hidden, latent, enc_rng);
  m.decoder = DecoderParams::init(latent.total(), hidden, channels, dec_rng);
  return m;
}

std::vector<Parameter*> VaeModel::params() {
  auto out = encoder.params();
  for (auto* p : decoder.params()) out.push_back(p);
  return out;
}

// ---- layout helpers -------------------------------------------------------------

Tensor time_major_batch(Graph& g, const RowMatrix& windows, std::span<const Index> rows, Index steps,
                        Index channels) {
  require(windows.cols() == steps * channels, "window width " + std::to_string(windows.cols()) +
                                                  " != T*D = " + std::to_string(steps * channels));
  const Index B = static_cast<Index>(rows.size());
  Array v(steps * B * channels);
  for (Index b = 0; b < B; ++b) {
    require(rows[b] >= 0 && rows[b] < windows.rows(), "batch row out of range");
    for (Index t = 0; t < steps; ++t)
      for (Index c = 0; c < channels; ++c) v[(t * B + b) * channels + c] = windows(rows[b], t * channels + c);
  }
  return g.constant({steps, B, channels}, std::move(v));
}

RowMatrix batch_major(const Array& time_major, Index steps, Index batch, Index channels) {
  require(time_major.size() == steps * batch * channels, "batch_major size mismatch");
  RowMatrix out(batch, steps * channels);
  for (Index t = 0; t < steps; ++t)
    for (Index b = 0; b < batch; ++b)
      for (Index c = 0; c < channels; ++c) out(b, t * channels + c) = time_major[(t * batch + b) * channels + c];
  return out;
}

PosteriorValues encode_values(VaeModel& m, const RowMatrix& windows, Index steps, Index chunk) {
  const Index N = windows.rows(), Z = m.latent().total();
  PosteriorValues out{RowMatrix(N, Z), RowMatrix(N, Z)};
  for (Index start = 0; start < N; start += chunk) {
    const Index len = std::min(chunk, N - start);
    std::vector<Index> rows(len);
    for (Index i = 0; i < len; ++i) rows[i] = start + i;
    Graph g(false);
    const auto post = encode(g, m.encoder, time_major_batch(g, windows, rows, steps, m.channels));
    out.mean.middleRows(start, len) = post.mean.matrix();
    out.log_std.middleRows(start, len) = post.log_std.matrix();
  }
  return out;
}

RowMatrix decode_values(VaeModel& m, const RowMatrix& z, Index steps, Index chunk) {
  const Index N = z.rows();
  RowMatrix out(N, steps * m.channels);
  for (Index start = 0; start < N; start += chunk) {
    const Index len = std::min(chunk, N - start);
    Graph g(false);
    const Tensor x = decode(g, m.decoder, g.constant(RowMatrix(z.middleRows(start, len))), steps);
    out.middleRows(start, len) = batch_major(x.value(), steps, len, m.channels);
  }
  return out;
}

}  // namespace dts
