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

#include "dts/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dts {

Index numel(const Shape& shape) {
  Index n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

Index view_cols(const Shape& s) { return s.empty() ? 1 : s.back(); }
Index view_rows(const Shape& s) { return s.empty() ? 1 : numel(s) / std::max<Index>(1, s.back()); }

int normalize_axis(int axis, const Shape& s) {
  const int n = static_cast<int>(s.size());
  const int a = axis < 0 ? axis + n : axis;
  require(a >= 0 && a < n, "axis " + std::to_string(axis) + " invalid for shape " + to_string(s));
  return a;
}

struct AxisSplit {
  Index outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Graph& graph_of(const Tensor& a) {
  require(a.valid(), "tensor is not attached to a graph");
  return *a.graph();
}

Graph& graph_of(const Tensor& a, const Tensor& b) {
  Graph& g = graph_of(a);
  require(b.valid() && b.graph() == &g, "tensors belong to different graphs");
  return g;
}

MatrixMap as_matrix(Array& a, Index rows, Index cols) { return MatrixMap(a.data(), rows, cols); }
ConstMatrixMap as_matrix(const Array& a, Index rows, Index cols) {
  return ConstMatrixMap(a.data(), rows, cols);
}

// ---- broadcasting ---------------------------------------------------------

enum class Bcast { None, Scalar, Row, Col };

Bcast broadcast_kind(const Shape& small, const Shape& big) {
  if (small == big) return Bcast::None;
  const Index n = numel(small);
  if (n == 1) return Bcast::Scalar;
  const Index rows = view_rows(big), cols = view_cols(big);
  if (view_rows(small) == 1 && view_cols(small) == cols) return Bcast::Row;
  if (view_cols(small) == 1 && n == rows) return Bcast::Col;
  throw ContractViolation("cannot broadcast " + to_string(small) + " against " + to_string(big));
}

Array expand(const Array& v, Bcast kind, Index rows, Index cols) {
  switch (kind) {
    case Bcast::None:
      return v;
    case Bcast::Scalar:
      return Array::Constant(rows * cols, v[0]);
    case Bcast::Row: {
      Array out(rows * cols);
      as_matrix(out, rows, cols).rowwise() = as_matrix(v, 1, cols).row(0);
      return out;
    }
    case Bcast::Col: {
      Array out(rows * cols);
      as_matrix(out, rows, cols).colwise() = as_matrix(v, rows, 1).col(0);
      return out;
    }
  }
  return v;
}

void accumulate_reduced(Array& dst, const Array& g, Bcast kind, Index rows, Index cols) {
  switch (kind) {
    case Bcast::None:
      dst += g;
      break;
    case Bcast::Scalar:
      dst[0] += g.sum();
      break;
    case Bcast::Row:
      as_matrix(dst, 1, cols).row(0) += as_matrix(g, rows, cols).colwise().sum();
      break;
    case Bcast::Col:
      as_matrix(dst, rows, 1).col(0) += as_matrix(g, rows, cols).rowwise().sum();
      break;
  }
}

struct Broadcast {
  Shape out;
  Bcast ka, kb;
  Index rows, cols;
};

Broadcast plan(const Tensor& a, const Tensor& b) {
  Broadcast p;
  p.out = a.size() >= b.size() ? a.shape() : b.shape();
  p.ka = broadcast_kind(a.shape(), p.out);
  p.kb = broadcast_kind(b.shape(), p.out);
  p.rows = view_rows(p.out);
  p.cols = view_cols(p.out);
  return p;
}

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  Graph& g = graph_of(a, b);
  const Broadcast p = plan(a, b);
  const Array av = expand(a.value(), p.ka, p.rows, p.cols);
  const Array bv = expand(b.value(), p.kb, p.rows, p.cols);
  Array out;
  const char* name = "";
  switch (op) {
    case BinOp::Add: out = av + bv; name = "add"; break;
    case BinOp::Sub: out = av - bv; name = "sub"; break;
    case BinOp::Mul: out = av * bv; name = "mul"; break;
    case BinOp::Div: out = av / bv; name = "div"; break;
  }
  std::vector<Array> saved;
  if (op == BinOp::Mul || op == BinOp::Div) saved = {av, bv};
  return g.record(name, p.out, std::move(out), {a.id(), b.id()},
                  [p, op](Graph& gr, int self) {
                    const Array& go = gr.out_grad(self);
                    const int ia = gr.inputs(self)[0], ib = gr.inputs(self)[1];
                    const auto& sv = gr.saved(self);
                    if (gr.needs_grad(ia)) {
                      Array da;
                      switch (op) {
                        case BinOp::Add:
                        case BinOp::Sub: da = go; break;
                        case BinOp::Mul: da = go * sv[1]; break;
                        case BinOp::Div: da = go / sv[1]; break;
                      }
                      accumulate_reduced(gr.grad_buffer(ia), da, p.ka, p.rows, p.cols);
                    }
                    if (gr.needs_grad(ib)) {
                      Array db;
                      switch (op) {
                        case BinOp::Add: db = go; break;
                        case BinOp::Sub: db = -go; break;
                        case BinOp::Mul: db = go * sv[0]; break;
                        case BinOp::Div: db = -go * sv[0] / sv[1].square(); break;
                      }
                      accumulate_reduced(gr.grad_buffer(ib), db, p.kb, p.rows, p.cols);
                    }
                  },
                  std::move(saved));
}

// Elementwise unary op whose derivative is expressed through (x, y).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* name, Fwd fwd, Deriv deriv) {
  Graph& g = graph_of(x);
  Array y = fwd(x.value());
  return g.record(name, x.shape(), y, {x.id()},
                  [deriv](Graph& gr, int self) {
                    const int ix = gr.inputs(self)[0];
                    if (!gr.needs_grad(ix)) return;
                    gr.grad_buffer(ix) += gr.out_grad(self) * deriv(gr.value(ix), gr.value(self));
                  });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

// ---- Tensor -----------------------------------------------------------------

const Shape& Tensor::shape() const { return graph_->nodes_[id_].shape; }
Index Tensor::dim(int axis) const {
  const auto& s = shape();
  return s[normalize_axis(axis, s)];
}
Index Tensor::size() const { return graph_->nodes_[id_].value.size(); }
const Array& Tensor::value() const { return graph_->nodes_[id_].value; }
ConstMatrixMap Tensor::matrix() const {
  const auto& s = shape();
  return as_matrix(value(), view_rows(s), view_cols(s));
}
double Tensor::item() const {
  require(size() == 1, "item() on tensor of shape " + to_string(shape()));
  return value()[0];
}
bool Tensor::requires_grad() const { return graph_->nodes_[id_].requires_grad; }

// ---- Graph ------------------------------------------------------------------

Tensor Graph::leaf(const char* op, Shape shape, Array values, bool requires_grad, Parameter* p) {
  require(numel(shape) == values.size(),
          std::string(op) + ": " + std::to_string(values.size()) + " values for shape " + to_string(shape));
  require(!backward_done_, "graph already consumed by backward()");
  if (!values.allFinite()) throw NumericFailure(std::string(op) + ": non-finite leaf values");
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.value = std::move(values);
  n.requires_grad = requires_grad && record_;
  n.param = p;
  n.leaf_variable = requires_grad && p == nullptr;
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size() - 1));
}

Tensor Graph::constant(Shape shape, Array values) {
  return leaf("constant", std::move(shape), std::move(values), false, nullptr);
}

Tensor Graph::constant(const RowMatrix& m) {
  return constant({m.rows(), m.cols()}, Eigen::Map<const Array>(m.data(), m.size()));
}

Tensor Graph::scalar(double v) { return constant({}, Array::Constant(1, v)); }

Tensor Graph::variable(Shape shape, Array values) {
  return leaf("variable", std::move(shape), std::move(values), true, nullptr);
}

Tensor Graph::variable(const RowMatrix& m) {
  return variable({m.rows(), m.cols()}, Eigen::Map<const Array>(m.data(), m.size()));
}

Tensor Graph::param(Parameter& p) {
  return leaf("param", {p.value.rows(), p.value.cols()},
              Eigen::Map<const Array>(p.value.data(), p.value.size()), true, &p);
}

Tensor Graph::record(const char* op, Shape shape, Array value, std::vector<int> inputs,
                     BackwardFn backward, std::vector<Array> saved) {
  require(!backward_done_, "graph already consumed by backward()");
  if (!value.allFinite()) {
    throw NumericFailure(std::string("operation '") + op + "' (#" + std::to_string(nodes_.size()) +
                         ") produced non-finite values");
  }
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.value = std::move(value);
  bool rg = false;
  for (int i : inputs) rg = rg || nodes_[i].requires_grad;
  n.requires_grad = rg && record_ && static_cast<bool>(backward);
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
    n.saved = std::move(saved);
  }
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size() - 1));
}

Array& Graph::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Array::Zero(n.value.size());
  return n.grad;
}

void Graph::backward(const Tensor& loss) {
  require(loss.graph() == this, "loss does not belong to this graph");
  require(!backward_done_, "backward() already executed on this graph");
  require(record_, "backward() on a graph built without recording");
  require(loss.size() == 1, "backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  if (!std::isfinite(loss.item())) throw NumericFailure("loss is not finite");
  backward_done_ = true;

  const int root = loss.id();
  if (nodes_[root].requires_grad) grad_buffer(root) = Array::Ones(1);
  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (!n.grad.allFinite()) {
      throw NumericFailure(std::string("non-finite gradient at operation '") + n.op + "' (#" +
                           std::to_string(id) + ")");
    }
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      n.param->grad += ConstMatrixMap(n.grad.data(), n.param->value.rows(), n.param->value.cols());
    }
  }
  // Release intermediates; leaf variables keep their gradients, the loss keeps its value.
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    Node& n = nodes_[id];
    n.saved.clear();
    n.backward = nullptr;
    if (!n.leaf_variable) {
      n.grad.resize(0);
      if (!n.inputs.empty() && id != root) n.value.resize(0);
    }
  }
}

const Array& Graph::grad(const Tensor& t) const {
  require(t.graph() == this, "tensor does not belong to this graph");
  require(backward_done_, "grad() before backward()");
  const Node& n = nodes_[t.id()];
  require(n.leaf_variable, "grad() is only retained for leaf variables");
  static const Array kEmpty;
  return n.grad.size() ? n.grad : kEmpty;
}

// ---- arithmetic ---------------------------------------------------------------

Tensor operator+(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add); }
Tensor operator-(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub); }
Tensor operator*(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul); }
Tensor operator/(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Div); }

Tensor affine(const Tensor& x, double scale, double shift) {
  Graph& g = graph_of(x);
  Array y = x.value() * scale + shift;
  return g.record("affine", x.shape(), std::move(y), {x.id()}, [scale](Graph& gr, int self) {
    const int ix = gr.inputs(self)[0];
    if (gr.needs_grad(ix)) gr.grad_buffer(ix) += scale * gr.out_grad(self);
  });
}

Tensor operator-(const Tensor& a) { return affine(a, -1.0, 0.0); }
Tensor operator*(double s, const Tensor& a) { return affine(a, s, 0.0); }
Tensor operator*(const Tensor& a, double s) { return affine(a, s, 0.0); }
Tensor operator+(const Tensor& a, double s) { return affine(a, 1.0, s); }
Tensor operator+(double s, const Tensor& a) { return affine(a, 1.0, s); }
Tensor operator-(const Tensor& a, double s) { return affine(a, 1.0, -s); }
Tensor operator-(double s, const Tensor& a) { return affine(a, -1.0, s); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  Graph& g = graph_of(a, b);
  require(a.shape().size() == 2 && b.shape().size() == 2,
          "matmul needs 2-D operands, got " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul shape mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()));
  Array out(m * n);
  as_matrix(out, m, n).noalias() = a.matrix() * b.matrix();
  return g.record("matmul", {m, n}, std::move(out), {a.id(), b.id()}, [m, k, n](Graph& gr, int self) {
    const int ia = gr.inputs(self)[0], ib = gr.inputs(self)[1];
    const auto go = as_matrix(gr.out_grad(self), m, n);
    if (gr.needs_grad(ia)) {
      as_matrix(gr.grad_buffer(ia), m, k).noalias() += go * as_matrix(gr.value(ib), k, n).transpose();
    }
    if (gr.needs_grad(ib)) {
      as_matrix(gr.grad_buffer(ib), k, n).noalias() += as_matrix(gr.value(ia), m, k).transpose() * go;
    }
  });
}

// ---- elementwise --------------------------------------------------------------

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](const Array& v) { return Array(v.tanh()); },
      [](const Array&, const Array& y) { return Array(1.0 - y.square()); });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid", [](const Array& v) { return Array(v.unaryExpr(&stable_sigmoid)); },
      [](const Array&, const Array& y) { return Array(y * (1.0 - y)); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](const Array& v) { return Array(v.exp()); },
      [](const Array&, const Array& y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](const Array& v) { return Array(v.log()); },
      [](const Array& v, const Array&) { return Array(v.inverse()); });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, "softplus",
      [](const Array& v) { return Array(v.max(0.0) + (-v.abs()).exp().log1p()); },
      [](const Array& v, const Array&) { return Array(v.unaryExpr(&stable_sigmoid)); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](const Array& v) { return Array(v.square()); },
      [](const Array& v, const Array&) { return Array(2.0 * v); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  require(lo <= hi, "clamp bounds inverted");
  return unary(
      x, "clamp", [lo, hi](const Array& v) { return Array(v.max(lo).min(hi)); },
      [lo, hi](const Array& v, const Array&) {
        return Array(((v >= lo) && (v <= hi)).cast<double>());
      });
}

// ---- reductions ---------------------------------------------------------------

Tensor sum(const Tensor& x) {
  Graph& g = graph_of(x);
  return g.record("sum", {}, Array::Constant(1, x.value().sum()), {x.id()}, [](Graph& gr, int self) {
    const int ix = gr.inputs(self)[0];
    if (gr.needs_grad(ix)) gr.grad_buffer(ix) += gr.out_grad(self)[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.size());
  require(n > 0, "mean of empty tensor");
  return affine(sum(x), 1.0 / n, 0.0);
}

Tensor sum(const Tensor& x, int axis) {
  Graph& g = graph_of(x);
  const int a = normalize_axis(axis, x.shape());
  const AxisSplit s = split_at(x.shape(), a);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + a);
  Array out = Array::Zero(s.outer * s.inner);
  const Array& v = x.value();
  for (Index o = 0; o < s.outer; ++o)
    for (Index k = 0; k < s.n; ++k)
      out.segment(o * s.inner, s.inner) += v.segment((o * s.n + k) * s.inner, s.inner);
  return g.record("sum_axis", std::move(out_shape), std::move(out), {x.id()}, [s](Graph& gr, int self) {
    const int ix = gr.inputs(self)[0];
    if (!gr.needs_grad(ix)) return;
    Array& dx = gr.grad_buffer(ix);
    const Array& go = gr.out_grad(self);
    for (Index o = 0; o < s.outer; ++o)
      for (Index k = 0; k < s.n; ++k)
        dx.segment((o * s.n + k) * s.inner, s.inner) += go.segment(o * s.inner, s.inner);
  });
}

Tensor mean(const Tensor& x, int axis) {
  const Index n = x.dim(axis);
  require(n > 0, "mean over empty axis");
  return affine(sum(x, axis), 1.0 / static_cast<double>(n), 0.0);
}

Tensor logsumexp(const Tensor& x, int axis) {
  Graph& g = graph_of(x);
  const int a = normalize_axis(axis, x.shape());
  const AxisSplit s = split_at(x.shape(), a);
  require(s.n > 0, "logsumexp over empty axis");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + a);
  const Array& v = x.value();
  Array out(s.outer * s.inner);
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.n * s.inner + i;
      double mx = v[base];
      for (Index k = 1; k < s.n; ++k) mx = std::max(mx, v[base + k * s.inner]);
      double acc = 0.0;
      for (Index k = 0; k < s.n; ++k) acc += std::exp(v[base + k * s.inner] - mx);
      out[o * s.inner + i] = mx + std::log(acc);
    }
  }
  return g.record("logsumexp", std::move(out_shape), std::move(out), {x.id()}, [s](Graph& gr, int self) {
    const int ix = gr.inputs(self)[0];
    if (!gr.needs_grad(ix)) return;
    Array& dx = gr.grad_buffer(ix);
    const Array& xv = gr.value(ix);
    const Array& y = gr.value(self);
    const Array& go = gr.out_grad(self);
    for (Index o = 0; o < s.outer; ++o) {
      for (Index i = 0; i < s.inner; ++i) {
        const Index base = o * s.n * s.inner + i;
        const double yo = y[o * s.inner + i], gi = go[o * s.inner + i];
        for (Index k = 0; k < s.n; ++k) dx[base + k * s.inner] += gi * std::exp(xv[base + k * s.inner] - yo);
      }
    }
  });
}

// ---- structure ----------------------------------------------------------------

Tensor concat(std::span<const Tensor> parts, int axis) {
  require(!parts.empty(), "concat of zero tensors");
  Graph& g = graph_of(parts[0]);
  const Shape& first = parts[0].shape();
  const int a = normalize_axis(axis, first);
  Shape out_shape = first;
  out_shape[a] = 0;
  std::vector<Index> widths;
  std::vector<int> ids;
  for (const auto& p : parts) {
    graph_of(parts[0], p);
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = (static_cast<int>(d) == a) || s[d] == first[d];
    require(ok, "concat shape mismatch: " + to_string(s) + " vs " + to_string(first));
    widths.push_back(s[a]);
    out_shape[a] += s[a];
    ids.push_back(p.id());
  }
  const AxisSplit s = split_at(out_shape, a);
  Array out(numel(out_shape));
  Index offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Array& v = parts[p].value();
    const Index block = widths[p] * s.inner;
    for (Index o = 0; o < s.outer; ++o) out.segment(o * s.n * s.inner + offset, block) = v.segment(o * block, block);
    offset += block;
  }
  return g.record("concat", std::move(out_shape), std::move(out), ids, [s, widths](Graph& gr, int self) {
    const Array& go = gr.out_grad(self);
    Index offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      const int ip = gr.inputs(self)[p];
      const Index block = widths[p] * s.inner;
      if (gr.needs_grad(ip)) {
        Array& dp = gr.grad_buffer(ip);
        for (Index o = 0; o < s.outer; ++o) dp.segment(o * block, block) += go.segment(o * s.n * s.inner + offset, block);
      }
      offset += block;
    }
  });
}

Tensor slice(const Tensor& x, int axis, Index start, Index length) {
  Graph& g = graph_of(x);
  const int a = normalize_axis(axis, x.shape());
  const AxisSplit s = split_at(x.shape(), a);
  require(start >= 0 && length >= 0 && start + length <= s.n,
          "slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") out of range for " +
              to_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape[a] = length;
  const Index block = length * s.inner;
  Array out(s.outer * block);
  const Array& v = x.value();
  for (Index o = 0; o < s.outer; ++o) out.segment(o * block, block) = v.segment((o * s.n + start) * s.inner, block);
  return g.record("slice", std::move(out_shape), std::move(out), {x.id()}, [s, start, block](Graph& gr, int self) {
    const int ix = gr.inputs(self)[0];
    if (!gr.needs_grad(ix)) return;
    Array& dx = gr.grad_buffer(ix);
    const Array& go = gr.out_grad(self);
    for (Index o = 0; o < s.outer; ++o) dx.segment((o * s.n + start) * s.inner, block) += go.segment(o * block, block);
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  Graph& g = graph_of(x);
  require(numel(shape) == x.size(), "reshape " + to_string(x.shape()) + " -> " + to_string(shape));
  return g.record("reshape", std::move(shape), x.value(), {x.id()}, [](Graph& gr, int self) {
    const int ix = gr.inputs(self)[0];
    if (gr.needs_grad(ix)) gr.grad_buffer(ix) += gr.out_grad(self);
  });
}

Tensor gather_rows(const Tensor& x, std::span<const Index> rows) {
  Graph& g = graph_of(x);
  const auto m = x.matrix();
  const Index cols = m.cols();
  std::vector<Index> idx(rows.begin(), rows.end());
  Array out(static_cast<Index>(idx.size()) * cols);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && idx[r] < m.rows(), "gather_rows index out of range");
    out.segment(static_cast<Index>(r) * cols, cols) = m.row(idx[r]).transpose().array();
  }
  return g.record("gather_rows", {static_cast<Index>(idx.size()), cols}, std::move(out), {x.id()},
                  [idx, cols](Graph& gr, int self) {
                    const int ix = gr.inputs(self)[0];
                    if (!gr.needs_grad(ix)) return;
                    Array& dx = gr.grad_buffer(ix);
                    const Array& go = gr.out_grad(self);
                    for (std::size_t r = 0; r < idx.size(); ++r)
                      dx.segment(idx[r] * cols, cols) += go.segment(static_cast<Index>(r) * cols, cols);
                  });
}

Tensor pick(const Tensor& x, std::span<const Index> columns) {
  Graph& g = graph_of(x);
  const auto m = x.matrix();
  require(static_cast<Index>(columns.size()) == m.rows(), "pick needs one column per row");
  std::vector<Index> cols(columns.begin(), columns.end());
  Array out(m.rows());
  for (Index r = 0; r < m.rows(); ++r) {
    require(cols[r] >= 0 && cols[r] < m.cols(), "pick column out of range");
    out[r] = m(r, cols[r]);
  }
  const Index width = m.cols();
  return g.record("pick", {m.rows()}, std::move(out), {x.id()}, [cols, width](Graph& gr, int self) {
    const int ix = gr.inputs(self)[0];
    if (!gr.needs_grad(ix)) return;
    Array& dx = gr.grad_buffer(ix);
    const Array& go = gr.out_grad(self);
    for (std::size_t r = 0; r < cols.size(); ++r) dx[static_cast<Index>(r) * width + cols[r]] += go[r];
  });
}

Tensor grl(const Tensor& x, double lambda) {
  require(lambda >= 0.0, "gradient reversal weight must be >= 0");
  Graph& g = graph_of(x);
  return g.record("grl", x.shape(), x.value(), {x.id()}, [lambda](Graph& gr, int self) {
    const int ix = gr.inputs(self)[0];
    if (gr.needs_grad(ix)) gr.grad_buffer(ix) += -lambda * gr.out_grad(self);
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const Index> labels) {
  require(logits.shape().size() == 2, "cross_entropy expects [rows, classes] logits");
  require(!labels.empty() && static_cast<Index>(labels.size()) == logits.dim(0),
          "cross_entropy needs one label per row");
  return mean(logsumexp(logits, 1) - pick(logits, labels));
}

Tensor pairwise_log_normal(const Tensor& z, const Tensor& mean, const Tensor& log_std) {
  Graph& g = graph_of(z, mean);
  graph_of(mean, log_std);
  require(z.shape().size() == 2 && mean.shape().size() == 2 && mean.shape() == log_std.shape(),
          "pairwise_log_normal expects z [B, Z] and posteriors [M, Z]");
  const Index B = z.dim(0), M = mean.dim(0), Z = z.dim(1);
  require(mean.dim(1) == Z, "pairwise_log_normal latent width mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const auto zm = z.matrix(), mu = mean.matrix(), ls = log_std.matrix();
  const RowMatrix inv_std = (-ls.array()).exp().matrix();
  Array out(B * M * Z);
  for (Index i = 0; i < B; ++i)
    for (Index j = 0; j < M; ++j)
      for (Index d = 0; d < Z; ++d) {
        const double w = (zm(i, d) - mu(j, d)) * inv_std(j, d);
        out[(i * M + j) * Z + d] = -0.5 * w * w - ls(j, d) - half_log_2pi;
      }
  Array inv_flat = Eigen::Map<const Array>(inv_std.data(), inv_std.size());
  return g.record("pairwise_log_normal", {B, M, Z}, std::move(out), {z.id(), mean.id(), log_std.id()},
                  [B, M, Z](Graph& gr, int self) {
                    const auto& in = gr.inputs(self);
                    const Array& zv = gr.value(in[0]);
                    const Array& mv = gr.value(in[1]);
                    const Array& inv = gr.saved(self)[0];
                    const Array& go = gr.out_grad(self);
                    const bool gz = gr.needs_grad(in[0]), gm = gr.needs_grad(in[1]), gs = gr.needs_grad(in[2]);
                    Array dz = Array::Zero(B * Z), dm = Array::Zero(M * Z), ds = Array::Zero(M * Z);
                    for (Index i = 0; i < B; ++i)
                      for (Index j = 0; j < M; ++j)
                        for (Index d = 0; d < Z; ++d) {
                          const double gij = go[(i * M + j) * Z + d];
                          const double iv = inv[j * Z + d];
                          const double w = (zv[i * Z + d] - mv[j * Z + d]) * iv;
                          dz[i * Z + d] -= gij * w * iv;
                          dm[j * Z + d] += gij * w * iv;
                          ds[j * Z + d] += gij * (w * w - 1.0);
                        }
                    if (gz) gr.grad_buffer(in[0]) += dz;
                    if (gm) gr.grad_buffer(in[1]) += dm;
                    if (gs) gr.grad_buffer(in[2]) += ds;
                  },
                  {std::move(inv_flat)});
}

}  // namespace dts
