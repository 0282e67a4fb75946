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

#include "scrisk/model.hpp"

#include "scrisk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scrisk::erq
{

using geometry::Vec2;
using tensor::AttentionInputs;

namespace
{

Vec2 rotate(const Vec2 & v, double angle)
{
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

std::string layer_name(std::size_t layer, const char * part)
{
  return "dec" + std::to_string(layer) + "." + part;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

void validate(const ModelConfig & c)
{
  const auto fail = [](const std::string & msg) { throw ConfigError("model." + msg); };
  if (c.d_model == 0 || c.n_heads == 0 || c.d_model % c.n_heads != 0) {
    fail("d_model must be a positive multiple of n_heads");
  }
  if (c.d_model % 4 != 0) {
    fail("d_model must be a multiple of 4 (two-coordinate sinusoidal encodings)");
  }
  if (c.n_end == 0 || c.n_risk == 0) {
    fail("n_end and n_risk must be at least 1");
  }
  if (c.t_hist < 2 || c.t_fut == 0) {
    fail("t_hist must be >= 2 and t_fut >= 1");
  }
  if (c.n_dec == 0) {
    fail("n_dec must be at least 1");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
    fail("dropout must be in [0, 1)");
  }
  if (!(c.lambda_dense >= 0.0) || !(c.lambda_risk >= 0.0) || !(c.velocity_weight >= 0.0)) {
    fail("loss weights must be >= 0");
  }
  if (!(c.sigma_min > 0.0)) {
    fail("sigma_min must be positive");
  }
  if (!(c.anchor_scale > 0.0)) {
    fail("anchor_scale must be positive");
  }
}

nlohmann::json to_json(const ModelConfig & c)
{
  return {
    {"d_model", c.d_model},
    {"n_enc", c.n_enc},
    {"n_dec", c.n_dec},
    {"n_heads", c.n_heads},
    {"n_end", c.n_end},
    {"n_risk", c.n_risk},
    {"t_hist", c.t_hist},
    {"t_fut", c.t_fut},
    {"dropout", c.dropout},
    {"lambda_dense", c.lambda_dense},
    {"lambda_risk", c.lambda_risk},
    {"sigma_min", c.sigma_min},
    {"max_agents", c.max_agents},
    {"max_map_tokens", c.max_map_tokens},
    {"anchor_scale", c.anchor_scale},
    {"velocity_weight", c.velocity_weight},
  };
}

ModelConfig model_config_from_json(const nlohmann::json & j)
{
  if (!j.is_object()) {
    throw ConfigError("model: expected an object");
  }
  ModelConfig c;
  const nlohmann::json defaults = to_json(c);
  for (const auto & [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError("unknown key 'model." + key + "'");
    }
    (void)value;
  }
  const auto get_size = [&](const char * key, std::size_t & out) {
    if (!j.contains(key)) {
      return;
    }
    if (!j.at(key).is_number_unsigned()) {
      throw ConfigError(std::string("model.") + key + " must be a non-negative integer");
    }
    out = j.at(key).get<std::size_t>();
  };
  const auto get_double = [&](const char * key, double & out) {
    if (!j.contains(key)) {
      return;
    }
    if (!j.at(key).is_number()) {
      throw ConfigError(std::string("model.") + key + " must be a number");
    }
    out = j.at(key).get<double>();
  };
  get_size("d_model", c.d_model);
  get_size("n_enc", c.n_enc);
  get_size("n_dec", c.n_dec);
  get_size("n_heads", c.n_heads);
  get_size("n_end", c.n_end);
  get_size("n_risk", c.n_risk);
  get_size("t_hist", c.t_hist);
  get_size("t_fut", c.t_fut);
  get_double("dropout", c.dropout);
  get_double("lambda_dense", c.lambda_dense);
  get_double("lambda_risk", c.lambda_risk);
  get_double("sigma_min", c.sigma_min);
  get_size("max_agents", c.max_agents);
  get_size("max_map_tokens", c.max_map_tokens);
  get_double("anchor_scale", c.anchor_scale);
  get_double("velocity_weight", c.velocity_weight);
  validate(c);
  return c;
}

void validate(const IntentionSet & in)
{
  if (in.endpoints.empty() || in.risks.empty()) {
    throw ConfigError("intentions need at least one endpoint and one risk level");
  }
  for (const auto & p : in.endpoints) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ConfigError("intention endpoints must be finite");
    }
  }
  for (std::size_t i = 1; i < in.risks.size(); ++i) {
    if (!(in.risks[i] > in.risks[i - 1])) {
      throw ConfigError("risk intentions must be strictly increasing");
    }
  }
  if (in.risks.back() != risk::kCollisionRisk) {
    throw ConfigError("the highest risk intention must be 999");
  }
}

std::vector<double> default_risk_intentions(std::size_t n)
{
  if (n == 3) {
    return {300.0, 600.0, 999.0};
  }
  std::vector<double> out;
  for (std::size_t i = 1; i <= n; ++i) {
    out.push_back(i == n ? risk::kCollisionRisk : risk::kCollisionRisk * static_cast<double>(i) / static_cast<double>(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// inputs

Vec2 to_world(const SceneSample & s, const Vec2 & local) { return s.origin + rotate(local, s.heading); }

Vec2 to_local(const SceneSample & s, const Vec2 & world) { return rotate(world - s.origin, -s.heading); }

namespace
{

void cv_anchor(const SceneSample & s, const Vec2 & p_now, const Vec2 & p_prev, double freq, std::size_t t_fut, double * out)
{
  const Vec2 v = (p_now - p_prev) * freq;
  for (std::size_t k = 0; k < t_fut; ++k) {
    const double t = static_cast<double>(k + 1) / freq;
    out[4 * k + 0] = p_now.x + v.x * t;
    out[4 * k + 1] = p_now.y + v.y * t;
    out[4 * k + 2] = v.x;
    out[4 * k + 3] = v.y;
  }
  (void)s;
}

}  // namespace

SceneSample prepare_sample(const sim::SceneRecord & scene, const ModelConfig & config)
{
  validate(config);
  const std::size_t origin = scene.hazard_frame;
  const std::size_t th = config.t_hist;
  const std::size_t tf = config.t_fut;
  if (origin + 1 < th) {
    throw InsufficientHistory("scene " + scene.scene_id + " has fewer than t_hist frames before the origin");
  }
  std::size_t target_index = scene.agents.size();
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (scene.agents[i].id == scene.target_agent_id) {
      target_index = i;
    }
  }
  if (target_index == scene.agents.size()) {
    throw FormatError("scene " + scene.scene_id + " has no target agent");
  }
  const auto & target = scene.agents[target_index].track;
  for (const auto & a : scene.agents) {
    if (a.track.states.size() <= origin) {
      throw InsufficientHistory("scene " + scene.scene_id + ": track shorter than the origin frame");
    }
    if (a.track.frequency != target.frequency) {
      throw FrameRateMismatch("scene " + scene.scene_id + ": agents recorded at different rates");
    }
  }
  // risk rows follow the agents without the target
  if (scene.risk.per_agent.size() + 1 != scene.agents.size() || scene.risk.total.size() <= origin) {
    throw MissingRisk("scene " + scene.scene_id + " lacks a risk timeline over the history");
  }
  for (const auto & series : scene.risk.per_agent) {
    if (series.size() <= origin) {
      throw MissingRisk("scene " + scene.scene_id + ": risk series shorter than the history");
    }
  }

  SceneSample s;
  s.scene_id = scene.scene_id;
  const auto & o = target.states[origin];
  s.origin = o.position();
  s.heading = o.heading;
  const double freq = target.frequency;
  const std::size_t first = origin + 1 - th;

  // other agents, nearest first
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (i != target_index) {
      others.push_back(i);
    }
  }
  std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
    const double da = (scene.agents[a].track.states[origin].position() - s.origin).norm();
    const double db = (scene.agents[b].track.states[origin].position() - s.origin).norm();
    return da < db;
  });
  if (others.size() > config.max_agents) {
    others.resize(config.max_agents);
  }
  std::vector<std::size_t> agents{target_index};
  agents.insert(agents.end(), others.begin(), others.end());

  const std::size_t n = agents.size();
  s.agent_pos = Tensor(n, 2);
  const bool has_future = std::all_of(agents.begin(), agents.end(), [&](std::size_t i) {
    return scene.agents[i].track.states.size() > origin + tf;
  }) && scene.risk.total.size() > origin + tf;
  s.has_future = has_future;
  s.dense_anchor = Tensor(n, tf * 4);
  if (has_future) {
    s.dense_gt = Tensor(n, tf * 4);
  }
  for (std::size_t a = 0; a < n; ++a) {
    const auto & track = scene.agents[agents[a]].track;
    Tensor feat(th, kAgentFeatures);
    for (std::size_t k = 0; k < th; ++k) {
      const auto & st = track.states[first + k];
      const Vec2 p = to_local(s, st.position());
      const double psi = st.heading - s.heading;
      double * row = feat.row(k);
      row[0] = p.x / 10.0;
      row[1] = p.y / 10.0;
      row[2] = std::cos(psi);
      row[3] = std::sin(psi);
      row[4] = st.speed * std::cos(psi) / 10.0;
      row[5] = st.speed * std::sin(psi) / 10.0;
      row[6] = st.accel / 10.0;
      row[7] = st.yaw_rate;
      row[8] = st.length / 5.0;
      row[9] = st.width / 2.0;
      row[10] = a == 0 ? 1.0 : 0.0;
      row[11] = 1.0;
      row[12] = static_cast<double>(k + 1) / static_cast<double>(th);
    }
    s.agent_features.push_back(std::move(feat));
    s.agent_valid.push_back(true);
    s.agent_ids.push_back(scene.agents[agents[a]].id);
    const Vec2 p_now = to_local(s, track.states[origin].position());
    const Vec2 p_prev = to_local(s, track.states[origin - 1].position());
    s.agent_pos(a, 0) = p_now.x;
    s.agent_pos(a, 1) = p_now.y;
    cv_anchor(s, p_now, p_prev, freq, tf, s.dense_anchor.row(a));
    if (has_future) {
      for (std::size_t k = 0; k < tf; ++k) {
        const auto & st = track.states[origin + 1 + k];
        const Vec2 p = to_local(s, st.position());
        const Vec2 v = rotate(st.velocity(), -s.heading);
        double * row = s.dense_gt.row(a) + 4 * k;
        row[0] = p.x;
        row[1] = p.y;
        row[2] = v.x;
        row[3] = v.y;
      }
    }
    if (a > 0) {
      const auto & series = scene.risk.per_agent[agents[a] - (agents[a] > target_index ? 1 : 0)];
      Tensor rf(th, kRiskFeatures);
      for (std::size_t k = 0; k < th; ++k) {
        const auto & r = series[first + k];
        rf(k, 0) = r.probability;
        rf(k, 1) = r.cost;
        rf(k, 2) = r.risk / risk::kCollisionRisk;
        rf(k, 3) = static_cast<double>(k + 1) / static_cast<double>(th);
      }
      s.risk_features.push_back(std::move(rf));
    }
  }

  // map tokens, nearest first
  std::vector<std::size_t> segs(scene.map.size());
  std::iota(segs.begin(), segs.end(), 0);
  std::vector<double> seg_dist(scene.map.size(), 0.0);
  for (std::size_t i = 0; i < scene.map.size(); ++i) {
    double best = 1e300;
    for (const auto & p : scene.map[i].centerline) {
      best = std::min(best, (p - s.origin).norm());
    }
    seg_dist[i] = best;
  }
  std::stable_sort(segs.begin(), segs.end(), [&](std::size_t a, std::size_t b) { return seg_dist[a] < seg_dist[b]; });
  if (segs.size() > config.max_map_tokens) {
    segs.resize(config.max_map_tokens);
  }
  s.map_pos = Tensor(segs.size(), 2);
  for (std::size_t m = 0; m < segs.size(); ++m) {
    const auto & seg = scene.map[segs[m]];
    const std::size_t p_count = seg.centerline.size();
    if (p_count < 2) {
      throw FormatError("lane segment with fewer than two points");
    }
    Tensor feat(p_count, kMapFeatures);
    Vec2 mean_p;
    for (std::size_t k = 0; k < p_count; ++k) {
      const Vec2 p = to_local(s, seg.centerline[k]);
      const Vec2 q = k + 1 < p_count ? to_local(s, seg.centerline[k + 1]) : p;
      const Vec2 r = k + 1 < p_count ? p : to_local(s, seg.centerline[k - 1]);
      Vec2 dir = k + 1 < p_count ? q - p : p - r;
      const double len = dir.norm();
      dir = len > 0.0 ? dir * (1.0 / len) : Vec2{1.0, 0.0};
      feat(k, 0) = p.x / 10.0;
      feat(k, 1) = p.y / 10.0;
      feat(k, 2) = dir.x;
      feat(k, 3) = dir.y;
      feat(k, 4) = seg.lane_index < 0 ? 1.0 : 0.0;
      mean_p = mean_p + p;
    }
    mean_p = mean_p * (1.0 / static_cast<double>(p_count));
    s.map_pos(m, 0) = mean_p.x;
    s.map_pos(m, 1) = mean_p.y;
    s.map_features.push_back(std::move(feat));
  }

  // target anchor and supervision
  s.target_anchor_pos = Tensor(tf, 2);
  s.target_anchor_vel = Tensor(1, 2);
  for (std::size_t k = 0; k < tf; ++k) {
    s.target_anchor_pos(k, 0) = s.dense_anchor(0, 4 * k);
    s.target_anchor_pos(k, 1) = s.dense_anchor(0, 4 * k + 1);
  }
  s.target_anchor_vel(0, 0) = s.dense_anchor(0, 2);
  s.target_anchor_vel(0, 1) = s.dense_anchor(0, 3);
  if (has_future) {
    s.gt_traj = Tensor(tf, 2);
    s.gt_vel = Tensor(tf, 2);
    s.gt_risk = Tensor(tf, 3);
    for (std::size_t k = 0; k < tf; ++k) {
      s.gt_traj(k, 0) = s.dense_gt(0, 4 * k);
      s.gt_traj(k, 1) = s.dense_gt(0, 4 * k + 1);
      s.gt_vel(k, 0) = s.dense_gt(0, 4 * k + 2);
      s.gt_vel(k, 1) = s.dense_gt(0, 4 * k + 3);
      const auto & r = scene.risk.total[origin + 1 + k];
      s.gt_risk(k, 0) = r.probability;
      s.gt_risk(k, 1) = r.cost;
      s.gt_risk(k, 2) = r.risk / risk::kCollisionRisk;
      s.gt_max_risk = std::max(s.gt_max_risk, r.risk);
    }
  }
  return s;
}

void pad_agents(SceneSample & s, std::size_t n_agents, const ModelConfig & config)
{
  const std::size_t tf = config.t_fut;
  while (s.agent_features.size() < n_agents + 1) {
    s.agent_features.emplace_back(config.t_hist, kAgentFeatures);
    s.agent_valid.push_back(false);
    s.agent_ids.push_back(-1);
    s.risk_features.emplace_back(config.t_hist, kRiskFeatures);
    const auto grow = [](Tensor & t, std::size_t cols) {
      t.data.resize(t.data.size() + cols, 0.0);
      t.rows += 1;
      t.cols = cols;
    };
    grow(s.agent_pos, 2);
    grow(s.dense_anchor, tf * 4);
    if (s.has_future) {
      grow(s.dense_gt, tf * 4);
    }
  }
}

// ---------------------------------------------------------------------------
// network

namespace
{

// per-point MLP and max-pool, one token per entity
Var polyline_tokens(Graph & g, ParamStore & store, const std::string & name, const std::vector<Tensor> & entities,
                    std::size_t in_features, std::size_t d)
{
  std::size_t total = 0;
  for (const auto & e : entities) {
    if (e.cols != in_features) {
      throw ShapeError(name + ": expected " + std::to_string(in_features) + " features per point");
    }
    total += e.rows;
  }
  Tensor stacked(total, in_features);
  std::size_t off = 0;
  for (const auto & e : entities) {
    std::copy(e.data.begin(), e.data.end(), stacked.data.begin() + static_cast<long>(off * in_features));
    off += e.rows;
  }
  const Var h = tensor::mlp_block(g, store, name, g.constant(std::move(stacked)), d, d);
  std::vector<Var> pooled;
  off = 0;
  for (const auto & e : entities) {
    pooled.push_back(tensor::max_pool_rows(tensor::slice_rows(h, off, e.rows)));
    off += e.rows;
  }
  return tensor::concat_rows(pooled);
}

}  // namespace

EncodedScene encode_scene(Graph & g, ParamStore & store, const ModelConfig & c, const SceneSample & s)
{
  if (s.agent_features.empty()) {
    throw ShapeError("scene sample has no target agent");
  }
  if (s.risk_features.size() + 1 != s.agent_features.size()) {
    throw MissingRisk("scene " + s.scene_id + " needs one risk history per other agent");
  }
  const std::size_t d = c.d_model;
  EncodedScene enc;
  enc.n_agents = s.agent_features.size();
  enc.n_map = s.map_features.size();
  enc.n_risk_tokens = s.risk_features.size();
  enc.agent_mask = s.agent_valid;
  enc.map_mask.assign(enc.n_map, true);
  enc.risk_mask.assign(s.agent_valid.begin() + 1, s.agent_valid.end());

  std::vector<Var> parts{polyline_tokens(g, store, "enc.agent_poly", s.agent_features, kAgentFeatures, d)};
  if (enc.n_map > 0) {
    parts.push_back(polyline_tokens(g, store, "enc.map_poly", s.map_features, kMapFeatures, d));
  }
  if (enc.n_risk_tokens > 0) {
    parts.push_back(polyline_tokens(g, store, "enc.risk_poly", s.risk_features, kRiskFeatures, d));
  }
  Var x = tensor::concat_rows(parts);

  enc.agent_pe = tensor::sinusoidal_encoding(s.agent_pos, d);
  enc.map_pe = enc.n_map ? tensor::sinusoidal_encoding(s.map_pos, d) : Tensor(0, d);
  Tensor risk_pos(enc.n_risk_tokens, 2);
  std::copy(s.agent_pos.data.begin() + 2, s.agent_pos.data.end(), risk_pos.data.begin());
  enc.risk_pe = enc.n_risk_tokens ? tensor::sinusoidal_encoding(risk_pos, d) : Tensor(0, d);

  Tensor pe(0, d);
  for (const Tensor * t : {&enc.agent_pe, &enc.map_pe, &enc.risk_pe}) {
    pe.data.insert(pe.data.end(), t->data.begin(), t->data.end());
    pe.rows += t->rows;
  }
  std::vector<bool> mask = enc.agent_mask;
  mask.insert(mask.end(), enc.map_mask.begin(), enc.map_mask.end());
  mask.insert(mask.end(), enc.risk_mask.begin(), enc.risk_mask.end());
  const Var pos = g.constant(std::move(pe));

  for (std::size_t l = 0; l < c.n_enc; ++l) {
    const std::string name = "enc.layer" + std::to_string(l);
    AttentionInputs in{x, x, x, pos, pos, &mask, std::nullopt};
    x = tensor::attention_block(g, store, name + ".attn", in, d, c.n_heads, c.dropout);
    x = tensor::mlp_block(g, store, name + ".ffn", x, 2 * d, d, true);
  }
  x = tensor::layer_norm(g, store, "enc.final_ln", x);
  enc.agents = tensor::slice_rows(x, 0, enc.n_agents);
  if (enc.n_map > 0) {
    enc.map = tensor::slice_rows(x, enc.n_agents, enc.n_map);
  }
  if (enc.n_risk_tokens > 0) {
    enc.risk = tensor::slice_rows(x, enc.n_agents + enc.n_map, enc.n_risk_tokens);
  }
  return enc;
}

DenseFuture dense_future(Graph & g, ParamStore & store, const ModelConfig & c, const EncodedScene & enc, const SceneSample & s)
{
  DenseFuture out;
  const Var head = tensor::mlp_block(g, store, "dense.head", enc.agents, c.d_model, c.t_fut * 4);
  out.prediction = tensor::add(g.constant(s.dense_anchor), tensor::scale(head, c.anchor_scale));
  if (s.has_future) {
    out.loss = tensor::smooth_l1_loss(out.prediction, g.constant(s.dense_gt), &s.agent_valid);
  } else {
    out.loss = g.constant(Tensor::scalar(0.0));
  }
  return out;
}

IntentionEmbedding embed_intentions(Graph & g, ParamStore & store, const ModelConfig & c, const IntentionSet & intents)
{
  if (intents.endpoints.size() != c.n_end || intents.risks.size() != c.n_risk) {
    throw ConfigMismatch(
      "intentions have " + std::to_string(intents.endpoints.size()) + " endpoints and " +
      std::to_string(intents.risks.size()) + " risk levels; the model expects " + std::to_string(c.n_end) +
      " and " + std::to_string(c.n_risk));
  }
  Tensor ends(c.n_end, 2);
  for (std::size_t i = 0; i < c.n_end; ++i) {
    ends(i, 0) = intents.endpoints[i].x;
    ends(i, 1) = intents.endpoints[i].y;
  }
  Tensor risks(c.n_risk, 1, intents.risks);
  IntentionEmbedding out;
  out.endpoints = tensor::mlp_block(
    g, store, "intent.endpoint", g.constant(tensor::sinusoidal_encoding(ends, c.d_model)), c.d_model, c.d_model);
  out.risks = tensor::mlp_block(
    g, store, "intent.risk", g.constant(tensor::sinusoidal_encoding(risks, c.d_model)), c.d_model, c.d_model);
  return out;
}

DecoderState initial_queries(Graph & g, const ModelConfig & c)
{
  return {g.constant(Tensor(c.n_end, c.d_model)), g.constant(Tensor(c.n_risk, c.d_model))};
}

LayerOutput decode_layer(
  Graph & g, ParamStore & store, const ModelConfig & c, std::size_t layer, const DecoderState & state,
  const IntentionEmbedding & intents, const EncodedScene & enc, const std::vector<std::size_t> * head_rows)
{
  const std::size_t d = c.d_model;
  if (state.endpoint_queries.rows() != c.n_end || state.risk_queries.rows() != c.n_risk ||
      state.endpoint_queries.cols() != d || state.risk_queries.cols() != d) {
    throw ShapeError("decoder queries must be n_end x d_model and n_risk x d_model");
  }
  const double p = c.dropout;
  const Var & qt = state.endpoint_queries;
  const Var & qr = state.risk_queries;

  const Var st = tensor::attention_block(
    g, store, layer_name(layer, "self_t"), {qt, qt, qt, intents.endpoints, intents.endpoints, nullptr, std::nullopt},
    d, c.n_heads, p);
  const Var sr = tensor::attention_block(
    g, store, layer_name(layer, "self_r"), {qr, qr, qr, intents.risks, intents.risks, nullptr, std::nullopt}, d,
    c.n_heads, p);

  // endpoint branch: agents and map
  const Var query_t = tensor::concat_cols({st, intents.endpoints});
  const Var keys_a = tensor::concat_cols({enc.agents, g.constant(enc.agent_pe)});
  const Var ca = tensor::attention_block(
    g, store, layer_name(layer, "cross_a"), {query_t, keys_a, enc.agents, std::nullopt, std::nullopt, &enc.agent_mask, st},
    d, c.n_heads, p);
  Var cm = st;
  if (enc.n_map > 0) {
    const Var keys_m = tensor::concat_cols({enc.map, g.constant(enc.map_pe)});
    cm = tensor::attention_block(
      g, store, layer_name(layer, "cross_m"), {query_t, keys_m, enc.map, std::nullopt, std::nullopt, &enc.map_mask, st},
      d, c.n_heads, p);
  }
  const Var ct = tensor::mlp_block(g, store, layer_name(layer, "fuse_t"), tensor::concat_cols({ca, cm}), d, d);

  // risk branch; without other agents the queries pass through
  Var cr = sr;
  if (enc.n_risk_tokens > 0) {
    const Var query_r = tensor::concat_cols({sr, intents.risks});
    const Var keys_r = tensor::concat_cols({enc.risk, g.constant(enc.risk_pe)});
    cr = tensor::attention_block(
      g, store, layer_name(layer, "cross_r"), {query_r, keys_r, enc.risk, std::nullopt, std::nullopt, &enc.risk_mask, sr},
      d, c.n_heads, p);
  }

  // mode grid
  const Var grid = tensor::concat_cols({tensor::ext_endpoint(ct, c.n_risk), tensor::ext_risk(cr, c.n_end)});
  LayerOutput out;
  out.modes = tensor::layer_norm(g, store, layer_name(layer, "fuse_ln"), tensor::mlp_block(g, store, layer_name(layer, "fuse"), grid, d, d));
  out.logits = tensor::mlp_block(g, store, layer_name(layer, "cls"), out.modes, d, 1);

  if (head_rows) {
    out.head_rows = *head_rows;
  } else {
    out.head_rows.resize(c.n_modes());
    std::iota(out.head_rows.begin(), out.head_rows.end(), 0);
  }
  if (!out.head_rows.empty()) {
    const Var rows = head_rows ? tensor::gather_rows(out.modes, out.head_rows) : out.modes;
    out.trajectory = tensor::mlp_block(g, store, layer_name(layer, "traj"), rows, d, c.t_fut * 7);
    out.risk = tensor::mlp_block(g, store, layer_name(layer, "risk"), rows, d, c.t_fut * 3);
  }
  out.next.endpoint_queries = tensor::avg_risk_axis(out.modes, c.n_end, c.n_risk);
  out.next.risk_queries = tensor::avg_endpoint_axis(out.modes, c.n_end, c.n_risk);
  return out;
}

ModeTensors mode_tensors(Graph & g, const ModelConfig & c, const LayerOutput & out, std::size_t h, const SceneSample & s)
{
  const Var raw = tensor::reshape(tensor::slice_rows(out.trajectory, h, 1), c.t_fut, 7);
  ModeTensors m;
  m.mu = tensor::add(g.constant(s.target_anchor_pos), tensor::scale(tensor::slice_cols(raw, 0, 2), c.anchor_scale));
  m.sigma = tensor::add_scalar(tensor::softplus(tensor::slice_cols(raw, 2, 2)), c.sigma_min);
  m.rho = tensor::scale(tensor::tanh(tensor::slice_cols(raw, 4, 1)), 0.5);
  m.velocity = tensor::add(tensor::scale(tensor::slice_cols(raw, 5, 2), c.anchor_scale), g.constant(s.target_anchor_vel));
  m.risk = tensor::reshape(tensor::slice_rows(out.risk, h, 1), c.t_fut, 3);
  return m;
}

// ---------------------------------------------------------------------------
// objective

std::pair<std::size_t, std::size_t> hard_assign(const IntentionSet & in, const Vec2 & gt_endpoint, double gt_max_risk)
{
  if (in.endpoints.empty() || in.risks.empty()) {
    throw ConfigError("hard assignment needs non-empty intentions");
  }
  std::size_t i_star = 0;
  double best = (in.endpoints[0] - gt_endpoint).norm();
  for (std::size_t i = 1; i < in.endpoints.size(); ++i) {
    const double dist = (in.endpoints[i] - gt_endpoint).norm();
    if (dist < best) {
      best = dist;
      i_star = i;
    }
  }
  std::size_t j_star = 0;
  best = std::abs(in.risks[0] - gt_max_risk);
  for (std::size_t j = 1; j < in.risks.size(); ++j) {
    const double dist = std::abs(in.risks[j] - gt_max_risk);
    if (dist < best) {
      best = dist;
      j_star = j;
    }
  }
  return {i_star, j_star};
}

LossResult hard_assign_and_losses(
  Graph & g, const ModelConfig & c, const std::vector<LayerOutput> & layers, const DenseFuture & dense,
  const SceneSample & s, const IntentionSet & intentions)
{
  if (!s.has_future) {
    throw InsufficientHistory("scene " + s.scene_id + " has no ground-truth future to train on");
  }
  if (layers.empty()) {
    throw ShapeError("no decoder layers");
  }
  const Vec2 gt_end{s.gt_traj(c.t_fut - 1, 0), s.gt_traj(c.t_fut - 1, 1)};
  const auto [i_star, j_star] = hard_assign(intentions, gt_end, s.gt_max_risk);
  const std::size_t m_star = i_star * c.n_risk + j_star;

  const Var gt_traj = g.constant(s.gt_traj);
  const Var gt_vel = g.constant(s.gt_vel);
  const Var gt_risk = g.constant(s.gt_risk);
  std::vector<Var> reg_terms;
  std::vector<Var> cls_terms;
  std::vector<Var> risk_terms;
  for (const auto & layer : layers) {
    const auto it = std::find(layer.head_rows.begin(), layer.head_rows.end(), m_star);
    if (it == layer.head_rows.end()) {
      throw ShapeError("decoder heads were not evaluated for the assigned mode");
    }
    const ModeTensors mt = mode_tensors(g, c, layer, static_cast<std::size_t>(it - layer.head_rows.begin()), s);
    const Var nll = tensor::gaussian_nll(mt.mu, mt.sigma, mt.rho, gt_traj);
    const Var vel = tensor::l1_loss(mt.velocity, gt_vel);
    reg_terms.push_back(tensor::add(nll, tensor::scale(vel, c.velocity_weight)));
    const Var ce = tensor::cross_entropy(layer.logits, m_star);
    cls_terms.push_back(ce);
    risk_terms.push_back(tensor::add(tensor::l1_loss(mt.risk, gt_risk), ce));
  }
  const Var reg = tensor::sum(tensor::concat_rows(reg_terms));
  const Var cls = tensor::sum(tensor::concat_rows(cls_terms));
  const Var risk_l = tensor::sum(tensor::concat_rows(risk_terms));
  const Var traj = tensor::add(reg, cls);
  const Var total = tensor::add(
    tensor::add(traj, tensor::scale(dense.loss, c.lambda_dense)), tensor::scale(risk_l, c.lambda_risk));

  LossResult r;
  r.total = total;
  auto & b = r.breakdown;
  b.reg = reg.value().data[0];
  b.cls = cls.value().data[0];
  b.traj = traj.value().data[0];
  b.dense = dense.loss.value().data[0];
  b.risk = risk_l.value().data[0];
  b.total = total.value().data[0];
  b.i_star = i_star;
  b.j_star = j_star;
  b.mode = m_star;
  return r;
}

// ---------------------------------------------------------------------------
// model

namespace
{

SceneSample synthetic_sample(const ModelConfig & c)
{
  SceneSample s;
  s.scene_id = "init";
  for (std::size_t a = 0; a < 2; ++a) {
    s.agent_features.emplace_back(c.t_hist, kAgentFeatures, 0.1);
    s.agent_valid.push_back(true);
    s.agent_ids.push_back(static_cast<int>(a));
  }
  s.agent_pos = Tensor(2, 2, {0.0, 0.0, 10.0, 0.0});
  s.map_features.emplace_back(sim::kPolylinePoints, kMapFeatures, 0.1);
  s.map_pos = Tensor(1, 2, {5.0, 0.0});
  s.risk_features.emplace_back(c.t_hist, kRiskFeatures, 0.1);
  s.has_future = true;
  s.dense_gt = Tensor(2, c.t_fut * 4);
  s.dense_anchor = Tensor(2, c.t_fut * 4);
  s.target_anchor_pos = Tensor(c.t_fut, 2);
  s.target_anchor_vel = Tensor(1, 2);
  s.gt_traj = Tensor(c.t_fut, 2);
  s.gt_vel = Tensor(c.t_fut, 2);
  s.gt_risk = Tensor(c.t_fut, 3);
  return s;
}

enum class Pass { kTrain, kPredict };

ForwardPass run_forward(Graph & g, Model & model, const SceneSample & s, Pass pass)
{
  const ModelConfig & c = model.config;
  ForwardPass fp;
  fp.encoded = encode_scene(g, model.store, c, s);
  fp.dense = dense_future(g, model.store, c, fp.encoded, s);
  const IntentionEmbedding intents = embed_intentions(g, model.store, c, model.intentions);
  std::vector<std::size_t> rows;
  if (pass == Pass::kTrain) {
    if (!s.has_future) {
      throw InsufficientHistory("scene " + s.scene_id + " has no ground-truth future to train on");
    }
    const Vec2 gt_end{s.gt_traj(c.t_fut - 1, 0), s.gt_traj(c.t_fut - 1, 1)};
    const auto [i, j] = hard_assign(model.intentions, gt_end, s.gt_max_risk);
    rows.push_back(i * c.n_risk + j);
  }
  DecoderState state = initial_queries(g, c);
  for (std::size_t l = 0; l < c.n_dec; ++l) {
    const bool last = l + 1 == c.n_dec;
    const std::vector<std::size_t> none;
    const std::vector<std::size_t> * head_rows = pass == Pass::kTrain ? &rows : (last ? nullptr : &none);
    fp.layers.push_back(decode_layer(g, model.store, c, l, state, intents, fp.encoded, head_rows));
    state = fp.layers.back().next;
  }
  return fp;
}

}  // namespace

ForwardPass forward(Graph & g, Model & model, const SceneSample & sample, bool all_modes)
{
  return run_forward(g, model, sample, all_modes ? Pass::kPredict : Pass::kTrain);
}

void Model::initialize(std::uint64_t seed)
{
  validate(config);
  validate(intentions);
  store = ParamStore(seed);
  Graph g(false);
  run_forward(g, *this, synthetic_sample(config), Pass::kTrain);
}

nlohmann::json Model::meta() const
{
  nlohmann::json ends = nlohmann::json::array();
  for (const auto & p : intentions.endpoints) {
    ends.push_back({p.x, p.y});
  }
  return {{"model", to_json(config)}, {"intentions", {{"endpoints", ends}, {"risks", intentions.risks}}}};
}

void Model::save(const std::string & path) const { tensor::save_checkpoint(path, store, meta()); }

Model Model::load(const std::string & path, const ModelConfig * expected)
{
  Model m;
  const nlohmann::json meta = tensor::load_checkpoint(path, m.store);
  try {
    m.config = model_config_from_json(meta.at("model"));
    for (const auto & p : meta.at("intentions").at("endpoints")) {
      m.intentions.endpoints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    m.intentions.risks = meta.at("intentions").at("risks").get<std::vector<double>>();
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(std::string("checkpoint meta: ") + e.what());
  } catch (const ConfigError & e) {
    throw FormatError(std::string("checkpoint meta: ") + e.what());
  }
  if (expected && !(*expected == m.config)) {
    throw ConfigMismatch("checkpoint " + path + " was trained with a different model configuration");
  }
  return m;
}

PredictionSet predict_all_modes(Model & model, const SceneSample & s)
{
  const ModelConfig & c = model.config;
  Graph g(false);
  const ForwardPass fp = run_forward(g, model, s, Pass::kPredict);
  const LayerOutput & last = fp.layers.back();
  const Tensor probs = tensor::softmax_rows(tensor::transpose(last.logits.value()));

  PredictionSet out;
  out.scene_id = s.scene_id;
  out.start_time = 1.0 / geometry::kDefaultFrequency;
  for (std::size_t m = 0; m < c.n_modes(); ++m) {
    const ModeTensors mt = mode_tensors(g, c, last, m, s);
    PredictedMode mode;
    mode.probability = probs.data[m];
    mode.endpoint_index = static_cast<int>(m / c.n_risk);
    mode.risk_index = static_cast<int>(m % c.n_risk);
    for (std::size_t k = 0; k < c.t_fut; ++k) {
      const Vec2 p = to_world(s, {mt.mu.value()(k, 0), mt.mu.value()(k, 1)});
      mode.trajectory.push_back(
        {p.x, p.y, mt.sigma.value()(k, 0), mt.sigma.value()(k, 1), mt.rho.value()(k, 0)});
      mode.velocity.push_back(rotate({mt.velocity.value()(k, 0), mt.velocity.value()(k, 1)}, s.heading));
      const double * r = mt.risk.value().row(k);
      mode.risk.push_back(
        {std::max(0.0, r[0]), std::max(0.0, r[1]), std::clamp(r[2] * risk::kCollisionRisk, 0.0, risk::kCollisionRisk)});
    }
    out.modes.push_back(std::move(mode));
  }
  return out;
}

PredictionSet predict(Model & model, const SceneSample & sample, std::size_t k)
{
  if (k == 0 || k > model.config.n_modes()) {
    throw ConfigError("k must be in [1, " + std::to_string(model.config.n_modes()) + "]");
  }
  PredictionSet all = predict_all_modes(model, sample);
  const auto keep = select_top_k_modes(all.modes, k);
  PredictionSet out = all;
  out.modes.clear();
  double z = 0.0;
  for (std::size_t i : keep) {
    z += all.modes[i].probability;
  }
  for (std::size_t i : keep) {
    out.modes.push_back(all.modes[i]);
    out.modes.back().probability = all.modes[i].probability / z;
  }
  return out;
}

PredictionSet predict(Model & model, const sim::SceneRecord & scene, std::size_t k)
{
  return predict(model, prepare_sample(scene, model.config), k);
}

std::vector<std::size_t> select_top_k_modes(const std::vector<PredictedMode> & modes, std::size_t k, double radius)
{
  if (k > modes.size()) {
    throw ConfigError("cannot select " + std::to_string(k) + " of " + std::to_string(modes.size()) + " modes");
  }
  std::vector<std::size_t> order(modes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return modes[a].probability > modes[b].probability;
  });
  const auto endpoint = [&](std::size_t i) {
    const auto & t = modes[i].trajectory;
    return t.empty() ? Vec2{} : Vec2{t.back().x, t.back().y};
  };
  std::vector<std::size_t> picked;
  std::vector<bool> taken(modes.size(), false);
  for (std::size_t i : order) {
    if (picked.size() == k) {
      break;
    }
    const bool suppressed = std::any_of(picked.begin(), picked.end(), [&](std::size_t j) {
      return (endpoint(i) - endpoint(j)).norm() < radius;
    });
    if (!suppressed) {
      picked.push_back(i);
      taken[i] = true;
    }
  }
  for (std::size_t i : order) {
    if (picked.size() == k) {
      break;
    }
    if (!taken[i]) {
      picked.push_back(i);
      taken[i] = true;
    }
  }
  return picked;
}

Vec2 endpoint_in_origin_frame(const sim::SceneRecord & scene, std::size_t t_fut)
{
  const auto & track = scene.target().track;
  const std::size_t origin = scene.hazard_frame;
  if (track.states.size() <= origin + t_fut) {
    throw InsufficientHistory("scene " + scene.scene_id + " ends before the prediction horizon");
  }
  const auto & o = track.states[origin];
  return rotate(track.states[origin + t_fut].position() - o.position(), -o.heading);
}

std::vector<Vec2> cluster_endpoint_intentions(const std::vector<Vec2> & pts, std::size_t k, std::uint64_t seed)
{
  if (k == 0) {
    throw ConfigError("k must be positive");
  }
  if (pts.size() < k) {
    throw EmptyDataset(
      "need at least " + std::to_string(k) + " endpoints for clustering, got " + std::to_string(pts.size()));
  }
  Rng rng(seed);
  std::vector<Vec2> centers;
  centers.push_back(pts[rng.below(pts.size())]);
  std::vector<double> d2(pts.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double best = 1e300;
      for (const auto & c : centers) {
        const Vec2 d = pts[i] - c;
        best = std::min(best, d.dot(d));
      }
      d2[i] = best;
      total += best;
    }
    // duplicate points: fall back to a uniform pick
    centers.push_back(total > 0.0 ? pts[rng.categorical(d2)] : pts[rng.below(pts.size())]);
  }
  std::vector<std::size_t> assign(pts.size(), 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double best = 1e300;
      for (std::size_t c = 0; c < k; ++c) {
        const Vec2 d = pts[i] - centers[c];
        const double dd = d.dot(d);
        if (dd < best) {
          best = dd;
          assign[i] = c;
        }
      }
    }
    std::vector<Vec2> sums(k);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sums[assign[i]] = sums[assign[i]] + pts[i];
      counts[assign[i]] += 1;
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        continue;  // empty cluster keeps its centroid
      }
      const Vec2 next = sums[c] * (1.0 / static_cast<double>(counts[c]));
      moved = std::max(moved, (next - centers[c]).norm());
      centers[c] = next;
    }
    if (moved <= 1e-6) {
      break;
    }
  }
  return centers;
}

// ---------------------------------------------------------------------------
// training

double learning_rate_at(const TrainConfig & config, std::size_t step)
{
  double lr = config.lr;
  for (const auto & [from, factor] : config.lr_schedule) {
    if (step >= from) {
      lr *= factor;
    }
  }
  return lr;
}

TrainResult train(
  Model & model, const std::vector<SceneSample> & samples, const TrainConfig & config,
  const std::function<void(const StepLog &)> & on_step)
{
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].has_future) {
      usable.push_back(i);
    }
  }
  if (usable.empty()) {
    throw EmptyDataset("no training scene has a ground-truth future");
  }
  if (config.batch_size == 0) {
    throw ConfigError("training.batch_size must be positive");
  }
  const std::size_t batch = std::min(config.batch_size, usable.size());
  Rng shuffle(derive_seed(config.seed, 0));
  std::vector<std::size_t> order = usable;
  std::size_t cursor = order.size();

  TrainResult result;
  model.store.zero_grad();
  for (std::size_t step = 0; step < config.steps; ++step) {
    StepLog log;
    log.step = step;
    log.lr = learning_rate_at(config, step);
    bool finite = true;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[shuffle.below(i)]);
        }
        cursor = 0;
      }
      const SceneSample & s = samples[order[cursor++]];
      Graph g(true, derive_seed(config.seed, 1 + step * batch + b));
      const ForwardPass fp = run_forward(g, model, s, Pass::kTrain);
      const LossResult lr = hard_assign_and_losses(g, model.config, fp.layers, fp.dense, s, model.intentions);
      if (!std::isfinite(lr.breakdown.total)) {
        finite = false;
        break;
      }
      g.backward(tensor::scale(lr.total, 1.0 / static_cast<double>(batch)));
      const double w = 1.0 / static_cast<double>(batch);
      log.mean.traj += w * lr.breakdown.traj;
      log.mean.reg += w * lr.breakdown.reg;
      log.mean.cls += w * lr.breakdown.cls;
      log.mean.dense += w * lr.breakdown.dense;
      log.mean.risk += w * lr.breakdown.risk;
      log.mean.total += w * lr.breakdown.total;
    }
    if (!finite || !tensor::gradients_finite(model.store)) {
      model.store.zero_grad();
      result.diverged = true;
      break;
    }
    tensor::AdamWConfig opt;
    opt.lr = log.lr;
    opt.weight_decay = config.weight_decay;
    tensor::adamw_step(model.store, opt);
    result.log.push_back(log);
    if (on_step) {
      on_step(log);
    }
  }
  return result;
}

}  // namespace scrisk::erq
