// Copyright 2026 The scrisk Authors
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

#ifndef SCRISK__AUTODIFF_HPP_
#define SCRISK__AUTODIFF_HPP_

#include "scrisk/rng.hpp"
#include "scrisk/tensor.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace scrisk::tensor
{

class Graph;
class ParamStore;

/// Handle to a node of a Graph.
struct Var
{
  Graph * graph = nullptr;
  std::size_t id = 0;

  const Tensor & value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

/// Tape of a single forward pass. Nodes are appended in evaluation order;
/// backward() walks them in reverse. Not thread-safe; use one graph per thread.
class Graph
{
public:
  using BackwardFn = std::function<void(Graph &, std::size_t)>;

  explicit Graph(bool training = false, std::uint64_t dropout_seed = 0);

  Var constant(Tensor value);
  /// Leaf whose gradient is kept (tests and finite-difference checks).
  Var variable(Tensor value);
  /// Leaf bound to a stored parameter; backward() adds its gradient to the
  /// store. Repeated requests for the same name return the same node.
  Var param(ParamStore & store, const std::string & name);

  const Tensor & value(Var v) const { return nodes_[v.id].value; }
  /// Gradient after backward(); zeros for nodes that did not receive any.
  Tensor grad(Var v) const;

  /// Reverse-mode sweep from a 1 x 1 node. Throws NotScalar.
  void backward(Var loss);

  bool training() const { return training_; }
  Rng & dropout_rng() { return rng_; }
  std::size_t size() const { return nodes_.size(); }

  // -- used by operator implementations
  Var push(Tensor value, const std::vector<Var> & parents, BackwardFn fn);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated on first use.
  Tensor & grad_buffer(std::size_t id);
  const Tensor & upstream(std::size_t id) const { return nodes_[id].grad; }

private:
  struct Node
  {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    ParamStore * store = nullptr;
    std::size_t param_index = 0;
  };

  std::vector<Node> nodes_;
  std::map<std::pair<const ParamStore *, std::string>, std::size_t> param_nodes_;
  bool training_ = false;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// operators. Binary elementwise operators accept b with the shape of a, a
// 1 x cols row (broadcast over rows) or a 1 x 1 scalar. All throw ShapeError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var divide(Var a, Var b);
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
Var neg(Var a);

Var matmul(Var a, Var b);
/// a b^T
Var matmul_nt(Var a, Var b);

Var gelu(Var a);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var square(Var a);
Var sqrt(Var a);
Var abs(Var a);
/// Elementwise Huber with unit threshold: 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise.
Var smooth_l1(Var a);
/// Gradient passes only strictly inside (lo, hi).
Var clamp(Var a, double lo, double hi);

Var softmax_rows(Var a, const std::vector<bool> * col_mask = nullptr);
Var log_softmax_rows(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

Var concat_cols(const std::vector<Var> & parts);
Var concat_rows(const std::vector<Var> & parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var reshape(Var a, std::size_t rows, std::size_t cols);
/// Rows of `a` listed in `index` (repetition allowed).
Var gather_rows(Var a, const std::vector<std::size_t> & index);

/// Column-wise max over rows with row_mask true (all rows when null); 1 x cols.
/// A fully masked input pools to zeros.
Var max_pool_rows(Var a, const std::vector<bool> * row_mask = nullptr);
Var mean_rows(Var a);
Var sum(Var a);
Var mean(Var a);
Var pick(Var a, std::size_t r, std::size_t c);

/// Mode-grid operators over the flat index m = e * n_risk + r.
/// ext_endpoint copies each of the n_end rows of x across the n_risk risk modes,
/// ext_risk copies each of the n_risk rows across the n_end endpoint modes.
Var ext_endpoint(Var x, std::size_t n_risk);
Var ext_risk(Var x, std::size_t n_end);
/// Mean over the risk axis (-> n_end rows) or the endpoint axis (-> n_risk rows).
/// Computed as x_0 + sum_i (x_i - x_0) / n, so the mean of identical copies is
/// the copy itself, bit for bit.
Var avg_risk_axis(Var q, std::size_t n_end, std::size_t n_risk);
Var avg_endpoint_axis(Var q, std::size_t n_end, std::size_t n_risk);

/// Inverted dropout; identity when the graph is not training or p == 0.
Var dropout(Var a, double p);
/// Differentiable sinusoidal encoding (see tensor::sinusoidal_encoding).
Var sinusoidal(Var values, std::size_t dim, double scale = 1.0, double temperature = 10000.0);

}  // namespace scrisk::tensor

#endif  // SCRISK__AUTODIFF_HPP_
