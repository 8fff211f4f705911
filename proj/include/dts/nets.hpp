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

#include <span>
#include <string>
#include <vector>

#include "dts/latent.hpp"
#include "dts/rng.hpp"
#include "dts/tensor.hpp"

namespace dts {

inline constexpr double kLogStdMin = -6.0;
inline constexpr double kLogStdMax = 2.0;

/// Dense layer y = x W + b with W: [in, out], b: [1, out].
struct Linear {
  Parameter weight;
  Parameter bias;

  static Linear init(Index in, Index out, CounterRng& rng, const std::string& name);
  Index in() const { return weight.value.rows(); }
  Index out() const { return weight.value.cols(); }
  Tensor operator()(Graph& g, const Tensor& x);
  std::vector<Parameter*> params() { return {&weight, &bias}; }
};

/// GRU weights with gates packed as [reset | update | candidate] along columns.
struct GruParams {
  Parameter w_in;   // [D, 3H]
  Parameter b_in;   // [1, 3H]
  Parameter w_hid;  // [H, 3H]
  Parameter b_hid;  // [1, 3H]

  /// Uniform(-1/sqrt(H), 1/sqrt(H)) entries.
  static GruParams init(Index input_size, Index hidden_size, CounterRng& rng, const std::string& name);
  Index input_size() const { return w_in.value.rows(); }
  Index hidden_size() const { return w_hid.value.rows(); }
  std::vector<Parameter*> params() { return {&w_in, &b_in, &w_hid, &b_hid}; }
};

/// One recurrence step. `x_proj` holds precomputed input projections
/// x W_in + b_in; rows [row_offset, row_offset + B) are used for this step.
Tensor gru_cell(Graph& g, const Tensor& x_proj, Index row_offset, const Tensor& h, const Tensor& w_hid,
                const Tensor& b_hid);

/// Runs the GRU over a time-major [T, B, D] input. Returns the T hidden
/// states, each [B, H].
std::vector<Tensor> gru_forward(Graph& g, GruParams& p, const Tensor& inputs, const Tensor& h0);

/// Same recurrence with one [B, D] input fed at every one of `steps` steps.
std::vector<Tensor> gru_forward_repeated(Graph& g, GruParams& p, const Tensor& input, Index steps,
                                         const Tensor& h0);

/// Diagonal Gaussian q(Z|x): mean and log-std, both [B, |Z|].
struct GaussianPosterior {
  Tensor mean;
  Tensor log_std;
};

/// Detached posterior values.
struct PosteriorValues {
  RowMatrix mean;
  RowMatrix log_std;
};

/// Shared GRU trunk plus one linear head per latent segment. Each head emits
/// [mean | raw log-std] of its segment.
struct EncoderParams {
  LatentSpec latent;
  GruParams trunk;
  std::vector<Linear> heads;

  static EncoderParams init(Index channels, Index hidden, const LatentSpec& latent, CounterRng& rng);
  std::vector<Parameter*> params();
};

/// z -> initial hidden state, GRU fed z at every step, per-step linear
/// read-out to D channels.
struct DecoderParams {
  Linear to_hidden;
  GruParams gru;
  Linear readout;

  static DecoderParams init(Index latent, Index hidden, Index channels, CounterRng& rng);
  Index latent_size() const { return to_hidden.in(); }
  Index channels() const { return readout.out(); }
  std::vector<Parameter*> params();
};

/// Single linear layer from a latent segment to class logits.
struct ClassifierParams {
  Linear layer;

  static ClassifierParams init(Index in, Index classes, CounterRng& rng, const std::string& name);
  Index in() const { return layer.in(); }
  Index classes() const { return layer.out(); }
  std::vector<Parameter*> params() { return layer.params(); }
};

/// Encodes a time-major [T, B, D] batch. Log-std is clamped to
/// [kLogStdMin, kLogStdMax]. No sampling happens here.
GaussianPosterior encode(Graph& g, EncoderParams& e, const Tensor& batch);

/// z = mean + exp(log_std) * noise; noise is a constant [B, |Z|] draw.
Tensor reparameterize(Graph& g, const GaussianPosterior& post, const RowMatrix& noise);

/// Reconstruction means, time-major [T, B, D].
Tensor decode(Graph& g, DecoderParams& d, const Tensor& z, Index steps);

Tensor classify(Graph& g, ClassifierParams& c, const Tensor& z_segment);

/// Encoder + decoder over a partitioned latent.
struct VaeModel {
  Index channels = 1;
  Index hidden = 64;
  EncoderParams encoder;
  DecoderParams decoder;

  static VaeModel init(Index channels, Index hidden, const LatentSpec& latent, std::uint64_t seed);
  const LatentSpec& latent() const { return encoder.latent; }
  std::vector<Parameter*> params();
};

/// Builds the time-major [T, B, D] constant for the given rows of a
/// [N, T*D] window matrix (time-major within a row).
Tensor time_major_batch(Graph& g, const RowMatrix& windows, std::span<const Index> rows, Index steps,
                        Index channels);

/// Inverse layout of time_major_batch: [T, B, D] values back to [B, T*D].
RowMatrix batch_major(const Array& time_major, Index steps, Index batch, Index channels);

/// Posterior means/log-stds for all windows, encoded in inference-only chunks.
PosteriorValues encode_values(VaeModel& m, const RowMatrix& windows, Index steps, Index chunk = 256);

/// Decoded [B, T*D] reconstructions of latent rows, in inference-only chunks.
RowMatrix decode_values(VaeModel& m, const RowMatrix& z, Index steps, Index chunk = 256);

}  // namespace dts
