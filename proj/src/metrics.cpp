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

#include "scrisk/metrics.hpp"

#include "scrisk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace scrisk::metrics
{

using geometry::Trajectory;
using geometry::Vec2;

std::string to_string(EvalGroup group)
{
  switch (group) {
    case EvalGroup::kNonCollision:
      return "non_collision";
    case EvalGroup::kCollisionIn1s:
      return "collision_in_1s";
    case EvalGroup::kCollisionIn2s:
      return "collision_in_2s";
    case EvalGroup::kCollisionIn5s:
      return "collision_in_5s";
  }
  return "unknown";
}

void validate(const MetricsConfig & c)
{
  if (!(c.miss_threshold > 0.0) || !(c.velocity_threshold > 0.0) || !(c.time_threshold > 0.0) ||
      !(c.risk_threshold > 0.0)) {
    throw ConfigError("metrics thresholds must be positive");
  }
  if (!(c.group_bounds[0] > 0.0 && c.group_bounds[0] < c.group_bounds[1] && c.group_bounds[1] < c.group_bounds[2])) {
    throw ConfigError("metrics.group_bounds must be positive and strictly increasing");
  }
}

nlohmann::json to_json(const MetricsConfig & c)
{
  return {
    {"miss_threshold", c.miss_threshold},
    {"group_bounds", c.group_bounds},
    {"velocity_threshold", c.velocity_threshold},
    {"time_threshold", c.time_threshold},
    {"risk_threshold", c.risk_threshold},
    {"truncate_at_collision", c.truncate_at_collision},
  };
}

MetricsConfig metrics_config_from_json(const nlohmann::json & j)
{
  if (!j.is_object()) {
    throw ConfigError("metrics: expected an object");
  }
  MetricsConfig c;
  const nlohmann::json defaults = to_json(c);
  for (const auto & item : j.items()) {
    if (!defaults.contains(item.key())) {
      throw ConfigError("unknown key 'metrics." + item.key() + "'");
    }
  }
  try {
    c.miss_threshold = j.value("miss_threshold", c.miss_threshold);
    c.group_bounds = j.value("group_bounds", c.group_bounds);
    c.velocity_threshold = j.value("velocity_threshold", c.velocity_threshold);
    c.time_threshold = j.value("time_threshold", c.time_threshold);
    c.risk_threshold = j.value("risk_threshold", c.risk_threshold);
    c.truncate_at_collision = j.value("truncate_at_collision", c.truncate_at_collision);
  } catch (const nlohmann::json::exception & e) {
    throw ConfigError(std::string("metrics: ") + e.what());
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------

ClassicalResult classical_metrics(
  const PredictionSet & pred, const Trajectory & gt, double miss_threshold, std::optional<std::size_t> frames)
{
  if (pred.modes.empty()) {
    throw ShapeError("prediction set has no modes");
  }
  const std::size_t t = pred.modes.front().trajectory.size();
  for (const auto & m : pred.modes) {
    if (m.trajectory.size() != t) {
      throw ShapeError("predicted modes differ in length");
    }
  }
  if (gt.size() != t || t == 0) {
    throw ShapeError(
      "prediction has " + std::to_string(t) + " points, ground truth " + std::to_string(gt.size()));
  }
  const std::size_t n = frames ? std::clamp<std::size_t>(*frames, 1, t) : t;

  ClassicalResult r;
  r.min_ade = std::numeric_limits<double>::infinity();
  r.min_fde = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < pred.modes.size(); ++m) {
    const auto & traj = pred.modes[m].trajectory;
    double sum = 0.0;
    double last = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      last = std::hypot(traj[k].x - gt.states[k].x, traj[k].y - gt.states[k].y);
      sum += last;
    }
    r.min_ade = std::min(r.min_ade, sum / static_cast<double>(n));
    if (last < r.min_fde) {
      r.min_fde = last;
      r.best_fde_mode = m;
    }
  }
  r.miss = r.min_fde > miss_threshold;
  const double p = pred.modes[r.best_fde_mode].probability;
  r.brier_min_fde = r.min_fde + (1.0 - p) * (1.0 - p);
  return r;
}

EvalGroup group_by_collision_time(const sim::SceneRecord & scene, const MetricsConfig & config)
{
  if (!scene.collision) {
    return EvalGroup::kNonCollision;
  }
  const double t = scene.collision->time;
  if (!(t > 0.0) || t > config.group_bounds[2]) {
    throw FormatError("scene " + scene.scene_id + " has a collision outside the prediction window");
  }
  if (t <= config.group_bounds[0]) {
    return EvalGroup::kCollisionIn1s;
  }
  if (t <= config.group_bounds[1]) {
    return EvalGroup::kCollisionIn2s;
  }
  return EvalGroup::kCollisionIn5s;
}

Trajectory future_track(const sim::SceneRecord & scene, std::size_t agent, std::size_t frames)
{
  const auto & track = scene.agents.at(agent).track;
  const std::size_t first = scene.hazard_frame + 1;
  if (track.states.size() < first + frames) {
    throw InsufficientHistory("scene " + scene.scene_id + " ends before the prediction horizon");
  }
  Trajectory out;
  out.frequency = track.frequency;
  out.start_time = track.time_at(first);
  out.states.assign(track.states.begin() + static_cast<long>(first), track.states.begin() + static_cast<long>(first + frames));
  return out;
}

// ---------------------------------------------------------------------------

namespace
{

std::size_t target_index(const sim::SceneRecord & scene)
{
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (scene.agents[i].id == scene.target_agent_id) {
      return i;
    }
  }
  throw FormatError("scene " + scene.scene_id + " has no target agent");
}

double gt_future_max_risk(const sim::SceneRecord & scene, std::size_t frames)
{
  const std::size_t first = scene.hazard_frame + 1;
  if (scene.risk.total.size() < first + frames) {
    throw MissingRisk("scene " + scene.scene_id + " lacks a future risk timeline");
  }
  double best = 0.0;
  for (std::size_t k = 0; k < frames; ++k) {
    best = std::max(best, scene.risk.total[first + k].risk);
  }
  return best;
}

double max_risk(const PredictedMode & mode)
{
  if (mode.risk.empty()) {
    throw ShapeError("predicted mode carries no risk sequence");
  }
  double best = 0.0;
  for (const auto & r : mode.risk) {
    best = std::max(best, r.risk);
  }
  return best;
}

}  // namespace

Trajectory mode_track(const PredictionSet & pred, const PredictedMode & mode, const sim::SceneRecord & scene)
{
  const auto & origin = scene.agents[target_index(scene)].track.states.at(scene.hazard_frame);
  const auto & pts = mode.trajectory;
  Trajectory out;
  out.start_time = pred.start_time;
  out.frequency = pred.frequency;
  double heading = origin.heading;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    Vec2 d;
    if (k + 1 < pts.size()) {
      d = {pts[k + 1].x - pts[k].x, pts[k + 1].y - pts[k].y};
    } else if (k > 0) {
      d = {pts[k].x - pts[k - 1].x, pts[k].y - pts[k - 1].y};
    }
    if (d.norm() > 1e-6) {
      heading = std::atan2(d.y, d.x);
    }
    geometry::AgentState st = origin;
    st.x = pts[k].x;
    st.y = pts[k].y;
    st.heading = heading;
    st.speed = k < mode.velocity.size() ? mode.velocity[k].norm() : d.norm() * pred.frequency;
    st.yaw_rate = 0.0;
    st.accel = 0.0;
    out.states.push_back(st);
  }
  return out;
}

std::optional<geometry::CollisionInfo> mode_collision(
  const PredictionSet & pred, const PredictedMode & mode, const sim::SceneRecord & scene)
{
  const std::size_t ti = target_index(scene);
  const Trajectory track = mode_track(pred, mode, scene);
  std::optional<geometry::CollisionInfo> best;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (i == ti) {
      continue;
    }
    const Trajectory other = future_track(scene, i, track.size());
    auto hit = geometry::first_collision(track, other, scene.target_agent_id, scene.agents[i].id);
    if (hit && (!best || hit->frame < best->frame)) {
      best = hit;
    }
  }
  return best;
}

std::size_t top_mode_index(const PredictionSet & pred)
{
  if (pred.modes.empty()) {
    throw ShapeError("prediction set has no modes");
  }
  std::size_t best = 0;
  for (std::size_t m = 1; m < pred.modes.size(); ++m) {
    if (pred.modes[m].probability > pred.modes[best].probability) {
      best = m;
    }
  }
  return best;
}

namespace
{

SafetyRecord safety_over(
  const std::vector<std::size_t> & modes, const PredictionSet & pred,
  const std::vector<std::optional<geometry::CollisionInfo>> & hits, const sim::SceneRecord & scene,
  const MetricsConfig & c)
{
  SafetyRecord r;
  r.collision_scene = scene.collision.has_value();
  if (r.collision_scene) {
    bool any = false;
    double ve = std::numeric_limits<double>::infinity();
    double te = std::numeric_limits<double>::infinity();
    for (std::size_t m : modes) {
      if (!hits[m]) {
        continue;
      }
      any = true;
      ve = std::min(ve, std::abs(hits[m]->relative_speed - scene.collision->relative_speed));
      te = std::min(te, std::abs(hits[m]->time - scene.collision->time));
    }
    r.collision_miss = !any;
    if (any) {
      r.velocity_error = ve;
      r.time_error = te;
    }
    r.velocity_miss = !any || ve > c.velocity_threshold;
    r.time_miss = !any || te > c.time_threshold;
  } else {
    const double gt = gt_future_max_risk(scene, pred.modes.front().risk.size());
    double err = std::numeric_limits<double>::infinity();
    for (std::size_t m : modes) {
      err = std::min(err, std::abs(max_risk(pred.modes[m]) - gt) / risk::kCollisionRisk);
    }
    r.risk_error = err;
    r.risk_miss = err > c.risk_threshold;
  }
  return r;
}

std::vector<std::optional<geometry::CollisionInfo>> all_hits(const PredictionSet & pred, const sim::SceneRecord & scene)
{
  std::vector<std::optional<geometry::CollisionInfo>> hits;
  hits.reserve(pred.modes.size());
  for (const auto & m : pred.modes) {
    hits.push_back(mode_collision(pred, m, scene));
  }
  return hits;
}

SafetyMetrics safety_from_hits(
  const PredictionSet & pred, const sim::SceneRecord & scene, const MetricsConfig & config,
  const std::vector<std::optional<geometry::CollisionInfo>> & hits)
{
  std::vector<std::size_t> every(pred.modes.size());
  for (std::size_t i = 0; i < every.size(); ++i) {
    every[i] = i;
  }
  SafetyMetrics out;
  out.all_modes = safety_over(every, pred, hits, scene, config);
  out.top_mode = safety_over({top_mode_index(pred)}, pred, hits, scene, config);
  return out;
}

}  // namespace

SafetyMetrics safety_metrics(const PredictionSet & pred, const sim::SceneRecord & scene, const MetricsConfig & config)
{
  if (pred.modes.empty()) {
    throw ShapeError("prediction set has no modes");
  }
  return safety_from_hits(pred, scene, config, all_hits(pred, scene));
}

double collision_probability_estimate(const PredictionSet & pred, const sim::SceneRecord & scene)
{
  if (pred.modes.empty()) {
    throw ShapeError("prediction set has no modes");
  }
  std::size_t n = 0;
  for (const auto & m : pred.modes) {
    n += mode_collision(pred, m, scene).has_value() ? 1 : 0;
  }
  return static_cast<double>(n) / static_cast<double>(pred.modes.size());
}

// ---------------------------------------------------------------------------

namespace
{

PredictionSet baseline(
  const sim::SceneRecord & scene, std::size_t t_fut, const sim::RiskParams & rp, bool accel, const char * method)
{
  const std::size_t ti = target_index(scene);
  const auto & track = scene.agents[ti].track;
  if (track.states.size() <= scene.hazard_frame) {
    throw InsufficientHistory("scene " + scene.scene_id + " ends before its origin frame");
  }
  Trajectory history;
  history.start_time = track.start_time;
  history.frequency = track.frequency;
  history.states.assign(track.states.begin(), track.states.begin() + static_cast<long>(scene.hazard_frame + 1));
  const Trajectory fut = accel ? geometry::predict_constant_acceleration(history, t_fut)
                               : geometry::predict_constant_velocity(history, t_fut);
  std::vector<Trajectory> others;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (i != ti) {
      others.push_back(future_track(scene, i, t_fut));
    }
  }
  const auto timeline = risk::scene_risk_history(fut, others, rp.drf, rp.cost, rp.rho_cap);

  PredictionSet out;
  out.scene_id = scene.scene_id;
  out.method = method;
  out.start_time = fut.start_time;
  out.frequency = fut.frequency;
  PredictedMode mode;
  mode.probability = 1.0;
  for (std::size_t k = 0; k < fut.size(); ++k) {
    const auto & st = fut.states[k];
    // unit spread: the baselines carry no uncertainty model
    mode.trajectory.push_back({st.x, st.y, 1.0, 1.0, 0.0});
    mode.velocity.push_back(st.velocity());
    mode.risk.push_back(timeline.total[k]);
  }
  out.modes.push_back(std::move(mode));
  return out;
}

}  // namespace

PredictionSet constant_velocity_baseline(const sim::SceneRecord & scene, std::size_t t_fut, const sim::RiskParams & risk)
{
  return baseline(scene, t_fut, risk, false, "cv");
}

PredictionSet constant_acceleration_baseline(const sim::SceneRecord & scene, std::size_t t_fut, const sim::RiskParams & risk)
{
  return baseline(scene, t_fut, risk, true, "ca");
}

// ---------------------------------------------------------------------------

SceneEvaluation evaluate_scene(const PredictionSet & pred, const sim::SceneRecord & scene, const MetricsConfig & config)
{
  if (pred.modes.empty()) {
    throw ShapeError("prediction set has no modes");
  }
  SceneEvaluation ev;
  ev.scene_id = scene.scene_id;
  ev.group = group_by_collision_time(scene, config);
  ev.k = pred.modes.size();

  const std::size_t t = pred.modes.front().trajectory.size();
  const Trajectory gt = future_track(scene, target_index(scene), t);
  std::optional<std::size_t> frames;
  if (config.truncate_at_collision && scene.collision) {
    frames = scene.collision->frame - scene.hazard_frame;
  }
  ev.classical_k = classical_metrics(pred, gt, config.miss_threshold, frames);
  PredictionSet top = pred;
  top.modes = {pred.modes[top_mode_index(pred)]};
  top.modes.front().probability = 1.0;
  ev.classical_1 = classical_metrics(top, gt, config.miss_threshold, frames);

  const auto hits = all_hits(pred, scene);
  ev.safety = safety_from_hits(pred, scene, config, hits);
  std::size_t n = 0;
  for (const auto & h : hits) {
    n += h ? 1 : 0;
  }
  ev.collision_fraction = static_cast<double>(n) / static_cast<double>(hits.size());
  return ev;
}

bool MetricCell::operator==(const MetricCell & o) const
{
  const bool same_value = (std::isnan(value) && std::isnan(o.value)) || value == o.value;
  return method == o.method && group == o.group && metric == o.metric && k == o.k && same_value && count == o.count;
}

const MetricCell * MetricsReport::find(
  const std::string & method, const std::string & group, const std::string & metric, std::size_t k) const
{
  for (const auto & c : cells) {
    if (c.method == method && c.group == group && c.metric == metric && c.k == k) {
      return &c;
    }
  }
  return nullptr;
}

namespace
{

struct Mean
{
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v)
  {
    sum += v;
    n += 1;
  }
  double value() const { return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN(); }
};

}  // namespace

void aggregate(MetricsReport & report, const std::string & method, const std::vector<SceneEvaluation> & scenes)
{
  if (scenes.empty()) {
    throw EmptyDataset("no scenes to aggregate for " + method);
  }
  const std::size_t k_all = scenes.front().k;
  for (const auto & s : scenes) {
    if (s.k != k_all) {
      throw ShapeError("scenes of one method must share the number of modes");
    }
  }
  const auto push = [&](const std::string & group, const std::string & metric, std::size_t k, const Mean & m) {
    report.cells.push_back({method, group, metric, k, m.value(), m.n});
  };

  std::vector<std::size_t> ks{k_all};
  if (k_all != 1) {
    ks.push_back(1);
  }
  for (std::size_t k : ks) {
    const bool all = k == k_all;
    std::vector<std::string> groups;
    for (auto g : kEvalGroups) {
      groups.push_back(to_string(g));
    }
    groups.push_back("all");
    for (const auto & group : groups) {
      Mean ade, fde, mr, brier;
      for (const auto & s : scenes) {
        if (group != "all" && to_string(s.group) != group) {
          continue;
        }
        const ClassicalResult & c = all ? s.classical_k : s.classical_1;
        ade.add(c.min_ade);
        fde.add(c.min_fde);
        mr.add(c.miss ? 1.0 : 0.0);
        brier.add(c.brier_min_fde);
      }
      push(group, "minADE", k, ade);
      push(group, "minFDE", k, fde);
      push(group, "MR", k, mr);
      push(group, "brier_minFDE", k, brier);
    }

    Mean mr_coll, mse_velo, mr_velo, mse_time, mr_time, mse_risk, mr_risk;
    for (const auto & s : scenes) {
      const SafetyRecord & r = all ? s.safety.all_modes : s.safety.top_mode;
      if (r.collision_scene) {
        mr_coll.add(r.collision_miss ? 1.0 : 0.0);
        mr_velo.add(r.velocity_miss ? 1.0 : 0.0);
        mr_time.add(r.time_miss ? 1.0 : 0.0);
        if (r.velocity_error) {
          mse_velo.add(*r.velocity_error * *r.velocity_error);
        }
        if (r.time_error) {
          mse_time.add(*r.time_error * *r.time_error);
        }
      } else if (r.risk_error) {
        mse_risk.add(*r.risk_error * *r.risk_error);
        mr_risk.add(r.risk_miss ? 1.0 : 0.0);
      }
    }
    push("collision", "MR_coll", k, mr_coll);
    push("collision", "MSE_velo", k, mse_velo);
    push("collision", "MR_velo", k, mr_velo);
    push("collision", "MSE_time", k, mse_time);
    push("collision", "MR_time", k, mr_time);
    push("non_collision", "MSE_risk", k, mse_risk);
    push("non_collision", "MR_risk", k, mr_risk);
  }

  Mean cpe_all, cpe_coll, cpe_non;
  for (const auto & s : scenes) {
    cpe_all.add(s.collision_fraction);
    (s.group == EvalGroup::kNonCollision ? cpe_non : cpe_coll).add(s.collision_fraction);
  }
  push("all", "collision_probability", k_all, cpe_all);
  push("collision", "collision_probability", k_all, cpe_coll);
  push("non_collision", "collision_probability", k_all, cpe_non);
}

nlohmann::json to_json(const MetricsReport & report)
{
  nlohmann::json cells = nlohmann::json::array();
  for (const auto & c : report.cells) {
    nlohmann::json value = std::isnan(c.value) ? nlohmann::json(nullptr) : nlohmann::json(c.value);
    cells.push_back(
      {{"method", c.method}, {"group", c.group}, {"metric", c.metric}, {"k", c.k}, {"value", value}, {"count", c.count}});
  }
  return {{"schema", kReportSchema}, {"meta", report.meta}, {"cells", cells}};
}

MetricsReport report_from_json(const nlohmann::json & j)
{
  MetricsReport r;
  try {
    if (j.at("schema").get<std::string>() != kReportSchema) {
      throw FormatError("report schema is not " + std::string(kReportSchema));
    }
    r.meta = j.at("meta");
    for (const auto & c : j.at("cells")) {
      MetricCell cell;
      cell.method = c.at("method").get<std::string>();
      cell.group = c.at("group").get<std::string>();
      cell.metric = c.at("metric").get<std::string>();
      cell.k = c.at("k").get<std::size_t>();
      cell.value = c.at("value").is_null() ? std::numeric_limits<double>::quiet_NaN() : c.at("value").get<double>();
      cell.count = c.at("count").get<std::size_t>();
      r.cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

std::string to_csv(const MetricsReport & report)
{
  std::string out = "method,group,metric,k,value,count\n";
  char buf[64];
  for (const auto & c : report.cells) {
    if (std::isnan(c.value)) {
      buf[0] = '\0';
    } else {
      std::snprintf(buf, sizeof buf, "%.9g", c.value);
    }
    out += c.method + "," + c.group + "," + c.metric + "," + std::to_string(c.k) + "," + buf + "," +
           std::to_string(c.count) + "\n";
  }
  return out;
}

std::vector<double> risk_level_crash_rates(
  const std::vector<PredictionSet> & all_modes, const std::vector<sim::SceneRecord> & scenes, std::size_t n_risk)
{
  if (all_modes.size() != scenes.size()) {
    throw ShapeError("one prediction set per scene expected");
  }
  std::vector<Mean> rates(n_risk);
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (const auto & m : all_modes[s].modes) {
      if (m.risk_index < 0 || static_cast<std::size_t>(m.risk_index) >= n_risk) {
        throw ShapeError("mode risk index out of range");
      }
      rates[static_cast<std::size_t>(m.risk_index)].add(mode_collision(all_modes[s], m, scenes[s]) ? 1.0 : 0.0);
    }
  }
  std::vector<double> out;
  for (const auto & r : rates) {
    out.push_back(r.value());
  }
  return out;
}

}  // namespace scrisk::metrics
