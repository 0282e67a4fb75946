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

#ifndef SCRISK__LAYERS_HPP_
#define SCRISK__LAYERS_HPP_

#include "scrisk/autodiff.hpp"
#include "scrisk/params.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scrisk::tensor
{

/// x W + b with parameters `<name>.w` (in x out) and `<name>.b` (1 x out).
Var linear(Graph & g, ParamStore & store, const std::string & name, Var x, std::size_t out);

/// Layer norm with parameters `<name>.g` and `<name>.b`.
Var layer_norm(Graph & g, ParamStore & store, const std::string & name, Var x);

/// Linear -> GELU -> Linear (`<name>.fc1`, `<name>.fc2`). With
/// `residual_norm`, returns x + MLP(LayerNorm(x)) (`<name>.ln`); x must then
/// have `out` columns.
Var mlp_block(
  Graph & g, ParamStore & store, const std::string & name, Var x, std::size_t hidden, std::size_t out,
  bool residual_norm = false);

struct AttentionInputs
{
  Var queries;
  Var keys;
  Var values;
  std::optional<Var> pos_q;  ///< added to the queries before projection
  std::optional<Var> pos_k;  ///< added to the keys before projection
  /// false marks padded keys; they receive exactly zero weight
  const std::vector<bool> * key_mask = nullptr;
  /// residual branch; defaults to `queries`
  std::optional<Var> residual;
};

/// Pre-norm multi-head attention with residual:
///   Q' = LayerNorm(Q); K' = Q', V' = Q' when keys/values are the queries
///   head h: softmax(((Q' + Pq) Wq_h)((K' + Pk) Wk_h)^T / sqrt(d_h)) (V' Wv_h)
///   out = R + concat_h(head_h) Wo
/// Parameters `<name>.{q,k,v,o}` (linear) and `<name>.ln` (query width). Dropout is applied
/// to the attention weights while the graph is training.
Var attention_block(
  Graph & g, ParamStore & store, const std::string & name, const AttentionInputs & in,
  std::size_t d_model, std::size_t n_heads, double dropout = 0.0);

// ---------------------------------------------------------------------------
// losses (1 x 1 results)

/// Mean smooth-L1 of pred - target over entries whose row is valid.
Var smooth_l1_loss(Var pred, Var target, const std::vector<bool> * row_mask = nullptr);
/// -log softmax(logits)[target] for logits flattened in row-major order.
Var cross_entropy(Var logits, std::size_t target);
/// Mean over T frames of the bivariate Gaussian negative log-likelihood of
/// gt (T x 2) under means mu (T x 2), deviations sigma (T x 2, > 0) and
/// correlation rho (T x 1, |rho| < 1).
Var gaussian_nll(Var mu, Var sigma, Var rho, Var gt);
/// Mean absolute difference.
Var l1_loss(Var pred, Var target);

}  // namespace scrisk::tensor

#endif  // SCRISK__LAYERS_HPP_
