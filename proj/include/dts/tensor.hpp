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

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dts/errors.hpp"

namespace dts {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Array = Eigen::ArrayXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Trainable 2-D array that outlives any single graph. Graphs accumulate
/// into `grad`; callers zero it between steps.
struct Parameter {
  std::string name;
  RowMatrix value;
  RowMatrix grad;

  Parameter() = default;
  Parameter(std::string n, RowMatrix v)
      : name(std::move(n)), value(std::move(v)), grad(RowMatrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

/// Handle to a value recorded in a Graph. Cheap to copy; only valid while its
/// graph is alive.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Shape& shape() const;
  Index dim(int axis) const;
  Index size() const;
  const Array& value() const;
  /// Row-major 2-D view: leading dims folded into rows, last dim is columns.
  ConstMatrixMap matrix() const;
  double item() const;
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Ordered record of operations for one forward pass, and the reverse sweep
/// over it. A graph supports exactly one backward().
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  /// With `record_backward = false` no closures or grads are kept (inference).
  explicit Graph(bool record_backward = true) : record_(record_backward) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tensor constant(Shape shape, Array values);
  Tensor constant(const RowMatrix& m);
  Tensor scalar(double v);
  /// Leaf whose gradient is kept and readable through grad() after backward.
  Tensor variable(Shape shape, Array values);
  Tensor variable(const RowMatrix& m);
  /// Leaf bound to a persistent parameter; backward accumulates into p.grad.
  Tensor param(Parameter& p);

  void backward(const Tensor& loss);
  bool backward_done() const { return backward_done_; }
  const Array& grad(const Tensor& t) const;

  /// Records an op. `backward` may be empty for non-differentiable results.
  Tensor record(const char* op, Shape shape, Array value, std::vector<int> inputs,
                BackwardFn backward, std::vector<Array> saved = {});

  // Accessors used by backward closures.
  const Array& value(int id) const { return nodes_[id].value; }
  const Shape& shape(int id) const { return nodes_[id].shape; }
  const Array& out_grad(int id) const { return nodes_[id].grad; }
  const std::vector<Array>& saved(int id) const { return nodes_[id].saved; }
  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }
  bool needs_grad(int id) const { return nodes_[id].requires_grad; }
  /// Lazily zero-initialized gradient buffer of node `id`.
  Array& grad_buffer(int id);
  const char* op_name(int id) const { return nodes_[id].op; }

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op = "";
    Shape shape;
    Array value;
    Array grad;
    std::vector<int> inputs;
    std::vector<Array> saved;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool leaf_variable = false;
  };

  Tensor leaf(const char* op, Shape shape, Array values, bool requires_grad, Parameter* p);

  std::vector<Node> nodes_;
  bool record_ = true;
  bool backward_done_ = false;

  friend class Tensor;
};

// Elementwise arithmetic. Binary ops broadcast a scalar, a [1, n] row, or an
// [m, 1] column against the 2-D view of the other operand.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator*(double s, const Tensor& a);
Tensor operator*(const Tensor& a, double s);
Tensor operator+(const Tensor& a, double s);
Tensor operator+(double s, const Tensor& a);
Tensor operator-(const Tensor& a, double s);
Tensor operator-(double s, const Tensor& a);

/// y = scale * x + shift
Tensor affine(const Tensor& x, double scale, double shift);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor square(const Tensor& x);
/// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& x, double lo, double hi);

/// Reductions; a negative axis counts from the end. The reduced axis is dropped.
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, int axis);
/// log(sum(exp(x))) along `axis`, computed around the running max.
Tensor logsumexp(const Tensor& x, int axis);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, Index start, Index length);
Tensor reshape(const Tensor& x, Shape shape);
/// Rows of a 2-D view, in the order given (repeats allowed).
Tensor gather_rows(const Tensor& x, std::span<const Index> rows);
/// out[i] = x[i, columns[i]] on a 2-D view.
Tensor pick(const Tensor& x, std::span<const Index> columns);

/// Gradient reversal: identity forward, backward multiplies by -lambda.
Tensor grl(const Tensor& x, double lambda);

/// Mean over rows of -log_softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, std::span<const Index> labels);

/// out[i, j, d] = log N(z[i, d]; mean[j, d], exp(log_std[j, d])^2).
Tensor pairwise_log_normal(const Tensor& z, const Tensor& mean, const Tensor& log_std);

}  // namespace dts
