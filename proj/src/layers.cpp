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

#include "scrisk/layers.hpp"

#include "scrisk/errors.hpp"

#include <cmath>
#include <numbers>

namespace scrisk::tensor
{

Var linear(Graph & g, ParamStore & store, const std::string & name, Var x, std::size_t out)
{
  store.ensure(name + ".w", x.cols(), out, Init::kXavier);
  store.ensure(name + ".b", 1, out, Init::kZeros);
  return add(matmul(x, g.param(store, name + ".w")), g.param(store, name + ".b"));
}

Var layer_norm(Graph & g, ParamStore & store, const std::string & name, Var x)
{
  store.ensure(name + ".g", 1, x.cols(), Init::kOnes);
  store.ensure(name + ".b", 1, x.cols(), Init::kZeros);
  return layer_norm(x, g.param(store, name + ".g"), g.param(store, name + ".b"));
}

Var mlp_block(
  Graph & g, ParamStore & store, const std::string & name, Var x, std::size_t hidden, std::size_t out,
  bool residual_norm)
{
  if (residual_norm && x.cols() != out) {
    throw ShapeError("mlp_block residual needs input width " + std::to_string(out));
  }
  const Var src = residual_norm ? layer_norm(g, store, name + ".ln", x) : x;
  const Var h = gelu(linear(g, store, name + ".fc1", src, hidden));
  const Var y = linear(g, store, name + ".fc2", h, out);
  return residual_norm ? add(x, y) : y;
}

Var attention_block(
  Graph & g, ParamStore & store, const std::string & name, const AttentionInputs & in,
  std::size_t d_model, std::size_t n_heads, double dropout_p)
{
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ShapeError("model width " + std::to_string(d_model) + " is not divisible by " + std::to_string(n_heads) + " heads");
  }
  if (in.keys.rows() != in.values.rows()) {
    throw ShapeError("keys and values must have the same number of tokens");
  }
  if (in.pos_q && !in.pos_q->value().same_shape(in.queries.value())) {
    throw ShapeError("query position term must match the queries");
  }
  if (in.pos_k && !in.pos_k->value().same_shape(in.keys.value())) {
    throw ShapeError("key position term must match the keys");
  }
  if (in.key_mask && in.key_mask->size() != in.keys.rows()) {
    throw ShapeError("key mask length must match the keys");
  }
  const Var residual = in.residual.value_or(in.queries);
  if (residual.cols() != d_model || residual.rows() != in.queries.rows()) {
    throw ShapeError("residual branch must be queries x " + std::to_string(d_model));
  }

  // pre-norm: self-attention normalizes keys and values together with the queries
  const Var qn = layer_norm(g, store, name + ".ln", in.queries);
  const Var kn = in.keys.id == in.queries.id ? qn : in.keys;
  const Var vn = in.values.id == in.queries.id ? qn : in.values;
  const Var q_in = in.pos_q ? add(qn, *in.pos_q) : qn;
  const Var k_in = in.pos_k ? add(kn, *in.pos_k) : kn;
  const Var q = linear(g, store, name + ".q", q_in, d_model);
  const Var k = linear(g, store, name + ".k", k_in, d_model);
  const Var v = linear(g, store, name + ".v", vn, d_model);

  const std::size_t dh = d_model / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Var qh = slice_cols(q, h * dh, dh);
    const Var kh = slice_cols(k, h * dh, dh);
    const Var vh = slice_cols(v, h * dh, dh);
    Var w = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), in.key_mask);
    w = dropout(w, dropout_p);
    heads.push_back(matmul(w, vh));
  }
  const Var merged = n_heads == 1 ? heads.front() : concat_cols(heads);
  const Var out = linear(g, store, name + ".o", merged, d_model);
  return add(residual, out);
}

Var smooth_l1_loss(Var pred, Var target, const std::vector<bool> * row_mask)
{
  if (!pred.value().same_shape(target.value())) {
    throw ShapeError("smooth_l1_loss operands differ in shape");
  }
  Var d = smooth_l1(sub(pred, target));
  if (!row_mask) {
    return mean(d);
  }
  if (row_mask->size() != pred.rows()) {
    throw ShapeError("smooth_l1_loss mask length must match rows");
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < row_mask->size(); ++i) {
    if ((*row_mask)[i]) {
      keep.push_back(i);
    }
  }
  if (keep.empty()) {
    return scale(sum(d), 0.0);
  }
  return mean(gather_rows(d, keep));
}

Var cross_entropy(Var logits, std::size_t target)
{
  const Var flat = reshape(logits, 1, logits.value().size());
  if (target >= flat.cols()) {
    throw ShapeError("cross_entropy target out of range");
  }
  return neg(pick(log_softmax_rows(flat), 0, target));
}

Var gaussian_nll(Var mu, Var sigma, Var rho, Var gt)
{
  const std::size_t t = mu.rows();
  if (mu.cols() != 2 || !mu.value().same_shape(sigma.value()) || !mu.value().same_shape(gt.value()) ||
      rho.rows() != t || rho.cols() != 1) {
    throw ShapeError("gaussian_nll expects mu, sigma, gt of T x 2 and rho of T x 1");
  }
  // normalized offsets
  const Var z = divide(sub(gt, mu), sigma);
  const Var zx = slice_cols(z, 0, 1);
  const Var zy = slice_cols(z, 1, 1);
  const Var one_m_r2 = add_scalar(neg(square(rho)), 1.0);
  const Var quad = sub(add(square(zx), square(zy)), scale(mul(mul(rho, zx), zy), 2.0));
  const Var log_sig = log(sigma);
  const Var log_det = add(add(slice_cols(log_sig, 0, 1), slice_cols(log_sig, 1, 1)), scale(log(one_m_r2), 0.5));
  const Var per_frame = add(add_scalar(log_det, std::log(2.0 * std::numbers::pi)), scale(divide(quad, one_m_r2), 0.5));
  return mean(per_frame);
}

Var l1_loss(Var pred, Var target)
{
  if (!pred.value().same_shape(target.value())) {
    throw ShapeError("l1_loss operands differ in shape");
  }
  return mean(abs(sub(pred, target)));
}

}  // namespace scrisk::tensor
