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

#include "scrisk/autodiff.hpp"

#include "scrisk/errors.hpp"
#include "scrisk/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace scrisk::tensor
{

const Tensor & Var::value() const { return graph->value(*this); }

Graph::Graph(bool training, std::uint64_t dropout_seed) : training_(training), rng_(dropout_seed) {}

Var Graph::push(Tensor value, const std::vector<Var> & parents, BackwardFn fn)
{
  Node n;
  n.value = std::move(value);
  for (const auto & p : parents) {
    if (p.graph != this) {
      throw ShapeError("operands belong to different graphs");
    }
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (n.requires_grad) {
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value)
{
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::variable(Tensor value)
{
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::param(ParamStore & store, const std::string & name)
{
  const auto key = std::make_pair(static_cast<const ParamStore *>(&store), name);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) {
    return Var{this, it->second};
  }
  const std::size_t index = store.index_of(name);
  Node n;
  n.value = store[index].value;
  n.requires_grad = true;
  n.store = &store;
  n.param_index = index;
  nodes_.push_back(std::move(n));
  param_nodes_[key] = nodes_.size() - 1;
  return Var{this, nodes_.size() - 1};
}

Tensor Graph::grad(Var v) const
{
  const Node & n = nodes_[v.id];
  return n.grad.empty() ? Tensor(n.value.rows, n.value.cols) : n.grad;
}

Tensor & Graph::grad_buffer(std::size_t id)
{
  Node & n = nodes_[id];
  if (n.grad.data.size() != n.value.data.size()) {
    n.grad = Tensor(n.value.rows, n.value.cols);
  }
  return n.grad;
}

void Graph::backward(Var loss)
{
  if (loss.graph != this) {
    throw ShapeError("loss belongs to another graph");
  }
  const Tensor & lv = nodes_[loss.id].value;
  if (lv.rows != 1 || lv.cols != 1) {
    throw NotScalar(
      "backward needs a 1x1 loss, got " + std::to_string(lv.rows) + "x" + std::to_string(lv.cols));
  }
  if (!nodes_[loss.id].requires_grad) {
    return;
  }
  grad_buffer(loss.id).data[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node & n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) {
      continue;
    }
    if (n.backward) {
      n.backward(*this, i);
    }
  }
  for (auto & n : nodes_) {
    if (n.store && !n.grad.empty()) {
      Parameter & p = (*n.store)[n.param_index];
      if (p.grad.data.size() != p.value.data.size()) {
        p.grad = Tensor(p.value.rows, p.value.cols);
      }
      for (std::size_t k = 0; k < p.grad.data.size(); ++k) {
        p.grad.data[k] += n.grad.data[k];
      }
    }
  }
}

namespace
{

enum class Bcast { kSame, kRow, kScalar };

Bcast broadcast_kind(const Tensor & a, const Tensor & b, const char * op)
{
  if (a.same_shape(b)) {
    return Bcast::kSame;
  }
  if (b.rows == 1 && b.cols == a.cols) {
    return Bcast::kRow;
  }
  if (b.rows == 1 && b.cols == 1) {
    return Bcast::kScalar;
  }
  throw ShapeError(
    std::string(op) + ": cannot broadcast " + std::to_string(b.rows) + "x" + std::to_string(b.cols) +
    " onto " + std::to_string(a.rows) + "x" + std::to_string(a.cols));
}

inline std::size_t bindex(Bcast k, std::size_t idx, std::size_t cols)
{
  switch (k) {
    case Bcast::kSame:
      return idx;
    case Bcast::kRow:
      return idx % cols;
    case Bcast::kScalar:
      return 0;
  }
  return 0;
}

void check_same_graph(Var a, Var b)
{
  if (a.graph != b.graph) {
    throw ShapeError("operands belong to different graphs");
  }
}

// elementwise unary op with derivative given as a function of (x, y)
template <class F, class D>
Var unary(Var a, F f, D df)
{
  const Tensor & x = a.value();
  Tensor y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    y.data[i] = f(x.data[i]);
  }
  const std::size_t pa = a.id;
  return a.graph->push(std::move(y), {a}, [pa, df](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    const Tensor & xv = g.value(Var{&g, pa});
    const Tensor & yv = g.value(Var{&g, self});
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t i = 0; i < up.data.size(); ++i) {
      ga.data[i] += up.data[i] * df(xv.data[i], yv.data[i]);
    }
  });
}

}  // namespace

Var add(Var a, Var b)
{
  check_same_graph(a, b);
  const Tensor & x = a.value();
  const Tensor & z = b.value();
  const Bcast k = broadcast_kind(x, z, "add");
  Tensor y = x;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    y.data[i] += z.data[bindex(k, i, x.cols)];
  }
  const std::size_t pa = a.id;
  const std::size_t pb = b.id;
  const std::size_t cols = x.cols;
  return a.graph->push(std::move(y), {a, b}, [pa, pb, k, cols](Graph & g, std::size_t self) {
    const Tensor & up = g.upstream(self);
    if (g.requires_grad(pa)) {
      Tensor & ga = g.grad_buffer(pa);
      for (std::size_t i = 0; i < up.data.size(); ++i) {
        ga.data[i] += up.data[i];
      }
    }
    if (g.requires_grad(pb)) {
      Tensor & gb = g.grad_buffer(pb);
      for (std::size_t i = 0; i < up.data.size(); ++i) {
        gb.data[bindex(k, i, cols)] += up.data[i];
      }
    }
  });
}

Var sub(Var a, Var b)
{
  check_same_graph(a, b);
  const Tensor & x = a.value();
  const Tensor & z = b.value();
  const Bcast k = broadcast_kind(x, z, "sub");
  Tensor y = x;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    y.data[i] -= z.data[bindex(k, i, x.cols)];
  }
  const std::size_t pa = a.id;
  const std::size_t pb = b.id;
  const std::size_t cols = x.cols;
  return a.graph->push(std::move(y), {a, b}, [pa, pb, k, cols](Graph & g, std::size_t self) {
    const Tensor & up = g.upstream(self);
    if (g.requires_grad(pa)) {
      Tensor & ga = g.grad_buffer(pa);
      for (std::size_t i = 0; i < up.data.size(); ++i) {
        ga.data[i] += up.data[i];
      }
    }
    if (g.requires_grad(pb)) {
      Tensor & gb = g.grad_buffer(pb);
      for (std::size_t i = 0; i < up.data.size(); ++i) {
        gb.data[bindex(k, i, cols)] -= up.data[i];
      }
    }
  });
}

Var mul(Var a, Var b)
{
  check_same_graph(a, b);
  const Tensor & x = a.value();
  const Tensor & z = b.value();
  const Bcast k = broadcast_kind(x, z, "mul");
  Tensor y = x;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    y.data[i] *= z.data[bindex(k, i, x.cols)];
  }
  const std::size_t pa = a.id;
  const std::size_t pb = b.id;
  const std::size_t cols = x.cols;
  return a.graph->push(std::move(y), {a, b}, [pa, pb, k, cols](Graph & g, std::size_t self) {
    const Tensor & up = g.upstream(self);
    const Tensor & xv = g.value(Var{&g, pa});
    const Tensor & zv = g.value(Var{&g, pb});
    if (g.requires_grad(pa)) {
      Tensor & ga = g.grad_buffer(pa);
      for (std::size_t i = 0; i < up.data.size(); ++i) {
        ga.data[i] += up.data[i] * zv.data[bindex(k, i, cols)];
      }
    }
    if (g.requires_grad(pb)) {
      Tensor & gb = g.grad_buffer(pb);
      for (std::size_t i = 0; i < up.data.size(); ++i) {
        gb.data[bindex(k, i, cols)] += up.data[i] * xv.data[i];
      }
    }
  });
}

Var divide(Var a, Var b)
{
  check_same_graph(a, b);
  const Tensor & x = a.value();
  const Tensor & z = b.value();
  const Bcast k = broadcast_kind(x, z, "divide");
  Tensor y = x;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    y.data[i] /= z.data[bindex(k, i, x.cols)];
  }
  const std::size_t pa = a.id;
  const std::size_t pb = b.id;
  const std::size_t cols = x.cols;
  return a.graph->push(std::move(y), {a, b}, [pa, pb, k, cols](Graph & g, std::size_t self) {
    const Tensor & up = g.upstream(self);
    const Tensor & zv = g.value(Var{&g, pb});
    const Tensor & yv = g.value(Var{&g, self});
    if (g.requires_grad(pa)) {
      Tensor & ga = g.grad_buffer(pa);
      for (std::size_t i = 0; i < up.data.size(); ++i) {
        ga.data[i] += up.data[i] / zv.data[bindex(k, i, cols)];
      }
    }
    if (g.requires_grad(pb)) {
      Tensor & gb = g.grad_buffer(pb);
      for (std::size_t i = 0; i < up.data.size(); ++i) {
        const std::size_t j = bindex(k, i, cols);
        gb.data[j] -= up.data[i] * yv.data[i] / zv.data[j];
      }
    }
  });
}

Var scale(Var a, double k)
{
  return unary(a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Var add_scalar(Var a, double k)
{
  return unary(a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var matmul(Var a, Var b)
{
  check_same_graph(a, b);
  Tensor y = matmul(a.value(), b.value());
  const std::size_t pa = a.id;
  const std::size_t pb = b.id;
  return a.graph->push(std::move(y), {a, b}, [pa, pb](Graph & g, std::size_t self) {
    const Tensor & up = g.upstream(self);
    if (g.requires_grad(pa)) {
      const Tensor d = matmul_nt(up, g.value(Var{&g, pb}));
      Tensor & ga = g.grad_buffer(pa);
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        ga.data[i] += d.data[i];
      }
    }
    if (g.requires_grad(pb)) {
      const Tensor d = matmul_tn(g.value(Var{&g, pa}), up);
      Tensor & gb = g.grad_buffer(pb);
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        gb.data[i] += d.data[i];
      }
    }
  });
}

Var matmul_nt(Var a, Var b)
{
  check_same_graph(a, b);
  Tensor y = matmul_nt(a.value(), b.value());
  const std::size_t pa = a.id;
  const std::size_t pb = b.id;
  return a.graph->push(std::move(y), {a, b}, [pa, pb](Graph & g, std::size_t self) {
    const Tensor & up = g.upstream(self);
    if (g.requires_grad(pa)) {
      // dA = dY B
      const Tensor d = matmul(up, g.value(Var{&g, pb}));
      Tensor & ga = g.grad_buffer(pa);
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        ga.data[i] += d.data[i];
      }
    }
    if (g.requires_grad(pb)) {
      // dB = dY^T A
      const Tensor d = matmul_tn(up, g.value(Var{&g, pa}));
      Tensor & gb = g.grad_buffer(pb);
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        gb.data[i] += d.data[i];
      }
    }
  });
}

Var gelu(Var a)
{
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
    a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
    [inv_sqrt_2pi](double x, double) {
      return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * std::exp(-0.5 * x * x) * inv_sqrt_2pi;
    });
}

Var relu(Var a)
{
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a)
{
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a)
{
  return unary(
    a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a)
{
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a)
{
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a)
{
  return unary(
    a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
    [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var square(Var a)
{
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a)
{
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var abs(Var a)
{
  return unary(
    a, [](double x) { return std::abs(x); },
    [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var smooth_l1(Var a)
{
  return unary(
    a, [](double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; },
    [](double x, double) { return std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0); });
}

Var clamp(Var a, double lo, double hi)
{
  return unary(
    a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
    [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var softmax_rows(Var a, const std::vector<bool> * col_mask)
{
  Tensor y = softmax_rows(a.value(), col_mask);
  const std::size_t pa = a.id;
  return a.graph->push(std::move(y), {a}, [pa](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    const Tensor & yv = g.value(Var{&g, self});
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t i = 0; i < yv.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < yv.cols; ++j) {
        dot += up(i, j) * yv(i, j);
      }
      for (std::size_t j = 0; j < yv.cols; ++j) {
        ga(i, j) += yv(i, j) * (up(i, j) - dot);
      }
    }
  });
}

Var log_softmax_rows(Var a)
{
  const Tensor & x = a.value();
  Tensor y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols; ++j) {
      mx = std::max(mx, x(i, j));
    }
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      z += std::exp(x(i, j) - mx);
    }
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < x.cols; ++j) {
      y(i, j) = x(i, j) - lse;
    }
  }
  const std::size_t pa = a.id;
  return a.graph->push(std::move(y), {a}, [pa](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    const Tensor & yv = g.value(Var{&g, self});
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t i = 0; i < yv.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < yv.cols; ++j) {
        s += up(i, j);
      }
      for (std::size_t j = 0; j < yv.cols; ++j) {
        ga(i, j) += up(i, j) - std::exp(yv(i, j)) * s;
      }
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps)
{
  check_same_graph(x, gamma);
  check_same_graph(x, beta);
  const Tensor & xv = x.value();
  const std::size_t n = xv.cols;
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw ShapeError("layer_norm gain/bias must be 1 x " + std::to_string(n));
  }
  Tensor y(xv.rows, n);
  Tensor xhat(xv.rows, n);
  std::vector<double> inv_std(xv.rows);
  const Tensor & gv = gamma.value();
  const Tensor & bv = beta.value();
  for (std::size_t i = 0; i < xv.rows; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mu += xv(i, j);
    }
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat(i, j) = (xv(i, j) - mu) * inv_std[i];
      y(i, j) = xhat(i, j) * gv.data[j] + bv.data[j];
    }
  }
  const std::size_t px = x.id;
  const std::size_t pg = gamma.id;
  const std::size_t pb = beta.id;
  return x.graph->push(
    std::move(y), {x, gamma, beta},
    [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph & g, std::size_t self) {
      const Tensor & up = g.upstream(self);
      const std::size_t rows = up.rows;
      const std::size_t cols = up.cols;
      if (g.requires_grad(pg)) {
        Tensor & gg = g.grad_buffer(pg);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            gg.data[j] += up(i, j) * xhat(i, j);
          }
        }
      }
      if (g.requires_grad(pb)) {
        Tensor & gb = g.grad_buffer(pb);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            gb.data[j] += up(i, j);
          }
        }
      }
      if (g.requires_grad(px)) {
        const Tensor & gv = g.value(Var{&g, pg});
        Tensor & gx = g.grad_buffer(px);
        const double inv_n = 1.0 / static_cast<double>(cols);
        for (std::size_t i = 0; i < rows; ++i) {
          double mean_d = 0.0;
          double mean_dx = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            const double d = up(i, j) * gv.data[j];
            mean_d += d;
            mean_dx += d * xhat(i, j);
          }
          mean_d *= inv_n;
          mean_dx *= inv_n;
          for (std::size_t j = 0; j < cols; ++j) {
            const double d = up(i, j) * gv.data[j];
            gx(i, j) += inv_std[i] * (d - mean_d - xhat(i, j) * mean_dx);
          }
        }
      }
    });
}

Var concat_cols(const std::vector<Var> & parts)
{
  if (parts.empty()) {
    throw ShapeError("concat_cols of nothing");
  }
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto & p : parts) {
    check_same_graph(parts.front(), p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols row mismatch");
    }
    cols += p.cols();
  }
  Tensor y(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto & p : parts) {
    const Tensor & v = p.value();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(v.row(i), v.row(i) + v.cols, y.row(i) + off);
    }
    offsets.push_back(off);
    off += v.cols;
  }
  std::vector<std::size_t> ids;
  for (const auto & p : parts) {
    ids.push_back(p.id);
  }
  return parts.front().graph->push(std::move(y), parts, [ids, offsets](Graph & g, std::size_t self) {
    const Tensor & up = g.upstream(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.requires_grad(ids[k])) {
        continue;
      }
      Tensor & gp = g.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < gp.rows; ++i) {
        for (std::size_t j = 0; j < gp.cols; ++j) {
          gp(i, j) += up(i, offsets[k] + j);
        }
      }
    }
  });
}

Var concat_rows(const std::vector<Var> & parts)
{
  if (parts.empty()) {
    throw ShapeError("concat_rows of nothing");
  }
  const std::size_t cols = parts.front().cols();
  Tensor y;
  y.cols = cols;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> ids;
  for (const auto & p : parts) {
    check_same_graph(parts.front(), p);
    if (p.cols() != cols) {
      throw ShapeError("concat_rows column mismatch");
    }
    offsets.push_back(y.rows);
    ids.push_back(p.id);
    const Tensor & v = p.value();
    y.data.insert(y.data.end(), v.data.begin(), v.data.end());
    y.rows += v.rows;
  }
  return parts.front().graph->push(std::move(y), parts, [ids, offsets, cols](Graph & g, std::size_t self) {
    const Tensor & up = g.upstream(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.requires_grad(ids[k])) {
        continue;
      }
      Tensor & gp = g.grad_buffer(ids[k]);
      const double * src = up.row(offsets[k]);
      for (std::size_t i = 0; i < gp.data.size(); ++i) {
        gp.data[i] += src[i];
      }
    }
    (void)cols;
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count)
{
  const Tensor & x = a.value();
  if (begin + count > x.rows) {
    throw ShapeError("slice_rows out of range");
  }
  Tensor y(count, x.cols, std::vector<double>(x.row(begin), x.row(begin) + count * x.cols));
  const std::size_t pa = a.id;
  return a.graph->push(std::move(y), {a}, [pa, begin](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    Tensor & ga = g.grad_buffer(pa);
    double * dst = ga.row(begin);
    for (std::size_t i = 0; i < up.data.size(); ++i) {
      dst[i] += up.data[i];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count)
{
  const Tensor & x = a.value();
  if (begin + count > x.cols) {
    throw ShapeError("slice_cols out of range");
  }
  Tensor y(x.rows, count);
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::copy(x.row(i) + begin, x.row(i) + begin + count, y.row(i));
  }
  const std::size_t pa = a.id;
  return a.graph->push(std::move(y), {a}, [pa, begin](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t i = 0; i < up.rows; ++i) {
      for (std::size_t j = 0; j < up.cols; ++j) {
        ga(i, begin + j) += up(i, j);
      }
    }
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols)
{
  const Tensor & x = a.value();
  if (rows * cols != x.size()) {
    throw ShapeError("reshape changes the element count");
  }
  Tensor y(rows, cols, x.data);
  const std::size_t pa = a.id;
  return a.graph->push(std::move(y), {a}, [pa](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t i = 0; i < up.data.size(); ++i) {
      ga.data[i] += up.data[i];
    }
  });
}

Var gather_rows(Var a, const std::vector<std::size_t> & index)
{
  const Tensor & x = a.value();
  Tensor y(index.size(), x.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows) {
      throw ShapeError("gather_rows index out of range");
    }
    std::copy(x.row(index[i]), x.row(index[i]) + x.cols, y.row(i));
  }
  const std::size_t pa = a.id;
  return a.graph->push(std::move(y), {a}, [pa, index](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t i = 0; i < index.size(); ++i) {
      for (std::size_t j = 0; j < up.cols; ++j) {
        ga(index[i], j) += up(i, j);
      }
    }
  });
}

Var max_pool_rows(Var a, const std::vector<bool> * row_mask)
{
  const Tensor & x = a.value();
  if (row_mask && row_mask->size() != x.rows) {
    throw ShapeError("max_pool_rows mask length does not match rows");
  }
  Tensor y(1, x.cols);
  std::vector<std::size_t> arg(x.cols, x.rows);
  for (std::size_t j = 0; j < x.cols; ++j) {
    for (std::size_t i = 0; i < x.rows; ++i) {
      if (row_mask && !(*row_mask)[i]) {
        continue;
      }
      if (arg[j] == x.rows || x(i, j) > y.data[j]) {
        y.data[j] = x(i, j);
        arg[j] = i;
      }
    }
  }
  const std::size_t pa = a.id;
  const std::size_t rows = x.rows;
  return a.graph->push(std::move(y), {a}, [pa, arg, rows](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t j = 0; j < arg.size(); ++j) {
      if (arg[j] < rows) {
        ga(arg[j], j) += up.data[j];
      }
    }
  });
}

Var mean_rows(Var a)
{
  const Tensor & x = a.value();
  if (x.rows == 0) {
    throw ShapeError("mean_rows of an empty tensor");
  }
  Tensor y(1, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      y.data[j] += x(i, j);
    }
  }
  const double inv = 1.0 / static_cast<double>(x.rows);
  for (auto & v : y.data) {
    v *= inv;
  }
  const std::size_t pa = a.id;
  return a.graph->push(std::move(y), {a}, [pa, inv](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t i = 0; i < ga.rows; ++i) {
      for (std::size_t j = 0; j < ga.cols; ++j) {
        ga(i, j) += up.data[j] * inv;
      }
    }
  });
}

Var sum(Var a)
{
  double s = 0.0;
  for (double v : a.value().data) {
    s += v;
  }
  const std::size_t pa = a.id;
  return a.graph->push(Tensor::scalar(s), {a}, [pa](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const double up = g.upstream(self).data[0];
    for (auto & v : g.grad_buffer(pa).data) {
      v += up;
    }
  });
}

Var mean(Var a)
{
  const std::size_t n = a.value().size();
  if (n == 0) {
    throw ShapeError("mean of an empty tensor");
  }
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var pick(Var a, std::size_t r, std::size_t c)
{
  const Tensor & x = a.value();
  if (r >= x.rows || c >= x.cols) {
    throw ShapeError("pick out of range");
  }
  const std::size_t pa = a.id;
  return a.graph->push(Tensor::scalar(x(r, c)), {a}, [pa, r, c](Graph & g, std::size_t self) {
    if (g.requires_grad(pa)) {
      g.grad_buffer(pa)(r, c) += g.upstream(self).data[0];
    }
  });
}

Var ext_endpoint(Var x, std::size_t n_risk)
{
  std::vector<std::size_t> index;
  for (std::size_t e = 0; e < x.rows(); ++e) {
    for (std::size_t r = 0; r < n_risk; ++r) {
      index.push_back(e);
    }
  }
  return gather_rows(x, index);
}

Var ext_risk(Var x, std::size_t n_end)
{
  std::vector<std::size_t> index;
  for (std::size_t e = 0; e < n_end; ++e) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
      index.push_back(r);
    }
  }
  return gather_rows(x, index);
}

namespace
{

// mean over groups of rows given by group(m) for m in [0, n_end * n_risk)
Var grid_mean(Var q, std::size_t n_end, std::size_t n_risk, bool over_risk)
{
  const Tensor & x = q.value();
  if (x.rows != n_end * n_risk || n_end == 0 || n_risk == 0) {
    throw ShapeError(
      "mode grid expects " + std::to_string(n_end * n_risk) + " rows, got " + std::to_string(x.rows));
  }
  const std::size_t groups = over_risk ? n_end : n_risk;
  const std::size_t members = over_risk ? n_risk : n_end;
  const auto row_of = [=](std::size_t gi, std::size_t k) {
    return over_risk ? gi * n_risk + k : k * n_risk + gi;
  };
  Tensor y(groups, x.cols);
  const double inv = 1.0 / static_cast<double>(members);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const double * base = x.row(row_of(gi, 0));
    for (std::size_t j = 0; j < x.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 1; k < members; ++k) {
        acc += x(row_of(gi, k), j) - base[j];
      }
      y(gi, j) = base[j] + acc * inv;
    }
  }
  const std::size_t pa = q.id;
  return q.graph->push(std::move(y), {q}, [pa, groups, members, inv, row_of](Graph & g, std::size_t self) {
    if (!g.requires_grad(pa)) {
      return;
    }
    const Tensor & up = g.upstream(self);
    Tensor & ga = g.grad_buffer(pa);
    for (std::size_t gi = 0; gi < groups; ++gi) {
      for (std::size_t k = 0; k < members; ++k) {
        double * dst = ga.row(row_of(gi, k));
        for (std::size_t j = 0; j < up.cols; ++j) {
          dst[j] += up(gi, j) * inv;
        }
      }
    }
  });
}

}  // namespace

Var avg_risk_axis(Var q, std::size_t n_end, std::size_t n_risk) { return grid_mean(q, n_end, n_risk, true); }

Var avg_endpoint_axis(Var q, std::size_t n_end, std::size_t n_risk) { return grid_mean(q, n_end, n_risk, false); }

Var dropout(Var a, double p)
{
  Graph & g = *a.graph;
  if (!g.training() || p <= 0.0) {
    return a;
  }
  const Tensor & x = a.value();
  Tensor mask(x.rows, x.cols);
  const double keep = 1.0 - p;
  for (auto & m : mask.data) {
    m = g.dropout_rng().bernoulli(keep) ? 1.0 / keep : 0.0;
  }
  return mul(a, g.constant(std::move(mask)));
}

Var sinusoidal(Var values, std::size_t dim, double scale_, double temperature)
{
  const Tensor & x = values.value();
  Tensor y = sinusoidal_encoding(x, dim, scale_, temperature);
  const std::size_t c = x.cols;
  const std::size_t per = dim / c;
  const std::size_t half = per / 2;
  const std::size_t pa = values.id;
  return values.graph->push(
    std::move(y), {values}, [pa, c, per, half, scale_, temperature](Graph & g, std::size_t self) {
      if (!g.requires_grad(pa)) {
        return;
      }
      const Tensor & up = g.upstream(self);
      const Tensor & yv = g.value(Var{&g, self});
      Tensor & ga = g.grad_buffer(pa);
      for (std::size_t i = 0; i < up.rows; ++i) {
        for (std::size_t a = 0; a < c; ++a) {
          double acc = 0.0;
          for (std::size_t k = 0; k < half; ++k) {
            const double freq =
              std::pow(temperature, -2.0 * static_cast<double>(k) / static_cast<double>(per)) / scale_;
            // d sin = freq cos, d cos = -freq sin
            acc += up(i, a * per + k) * freq * yv(i, a * per + half + k);
            acc -= up(i, a * per + half + k) * freq * yv(i, a * per + k);
          }
          ga(i, a) += acc;
        }
      }
    });
}

}  // namespace scrisk::tensor
