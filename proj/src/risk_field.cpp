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

#include "scrisk/risk_field.hpp"

#include "scrisk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace scrisk::risk
{

using geometry::AgentState;
using geometry::Trajectory;
using geometry::Vec2;

void validate(const DrfParams & p)
{
  if (!(p.A > 0.0) || !(p.B >= 0.0) || !(p.C > 0.0) || !(p.D > 0.0) || !(p.E > 0.0) ||
      !(p.s_min >= 0.0) || !(p.max_curvature > 0.0)) {
    throw ConfigError("drf: require A > 0, B >= 0, C > 0, D > 0, E > 0, s_min >= 0");
  }
}

void validate(const CostParams & p)
{
  if (!(p.basic_cost_norm >= 0.0) || !(p.w_b >= 0.0) || !(p.w_a >= 0.0) || !(p.w_r >= 0.0) ||
      !(p.ref_mass > 0.0) || !(p.ref_speed > 0.0)) {
    throw ConfigError("cost: weights must be >= 0 and reference mass/speed > 0");
  }
}

double look_ahead(double speed, const DrfParams & params)
{
  return params.D * std::pow(std::max(speed, 5.0), params.E);
}

double drf_probability(const AgentState & target, const Vec2 & point, const DrfParams & params)
{
  const auto frame = geometry::arc_frame_from_state(target, params.max_curvature);
  const auto st = geometry::project_to_arc(frame, point);
  const double s_max = look_ahead(target.speed, params);
  if (st.s < 0.0 || st.s >= s_max) {
    return 0.0;
  }
  const double s_eff = std::max(st.s, params.s_min);
  const double span = s_max - params.s_min;
  const double reach = s_max - s_eff;
  const double height = params.A * (reach * reach) / (span * span);
  const double sigma = params.B * s_eff + params.C;
  return height * std::exp(-(st.t * st.t) / (2.0 * sigma * sigma));
}

double collision_cost(const AgentState & target, const AgentState & obstacle, const CostParams & params)
{
  const double e_ref = 0.5 * params.ref_mass * params.ref_speed * params.ref_speed;
  const Vec2 v_obs = obstacle.velocity();
  const double e_abs = 0.5 * obstacle.mass * v_obs.dot(v_obs) / e_ref;

  const Vec2 rel_v = target.velocity() - v_obs;
  const Vec2 line = obstacle.position() - target.position();
  const double dist = line.norm();
  const double closing = dist > 0.0 ? rel_v.dot(line) / dist : rel_v.norm();
  const double reduced_mass = target.mass * obstacle.mass / (target.mass + obstacle.mass);
  const double closing_pos = std::max(0.0, closing);
  const double e_rel = 0.5 * reduced_mass * closing_pos * closing_pos / e_ref;

  return params.w_b * params.basic_cost_norm + params.w_a * e_abs + params.w_r * e_rel;
}

RiskTriple pairwise_risk(
  const AgentState & target, const AgentState & obstacle, const DrfParams & drf,
  const CostParams & cost, double rho_cap)
{
  if (!(rho_cap > 0.0)) {
    throw ConfigError("rho_cap must be positive");
  }
  geometry::validate(obstacle);

  double probability = 0.0;
  const auto corners = geometry::footprint_corners(obstacle);
  const Vec2 samples[5] = {obstacle.position(), corners[0], corners[1], corners[2], corners[3]};
  for (const auto & p : samples) {
    try {
      probability = std::max(probability, drf_probability(target, p, drf));
    } catch (const CenterSingularity &) {
      // the turning center has no lateral direction; the sample is skipped
    }
  }
  RiskTriple out;
  out.probability = probability;
  out.cost = collision_cost(target, obstacle, cost);
  if (geometry::obb_overlap(target, obstacle)) {
    out.risk = kCollisionRisk;
  } else {
    out.risk = std::min(kMaxSeparatedRisk, kCollisionRisk * probability * out.cost / rho_cap);
  }
  return out;
}

RiskTimeline scene_risk_history(
  const Trajectory & target_track, const std::vector<Trajectory> & other_tracks,
  const DrfParams & drf, const CostParams & cost, double rho_cap)
{
  const std::size_t n = target_track.states.size();
  for (const auto & other : other_tracks) {
    if (other.frequency != target_track.frequency) {
      throw FrameRateMismatch("risk history requires a common frame rate");
    }
    if (other.states.size() != n || std::abs(other.start_time - target_track.start_time) > 1e-9) {
      throw ShapeError(
        "risk history requires aligned tracks; got " + std::to_string(other.states.size()) +
        " frames against " + std::to_string(n));
    }
  }

  RiskTimeline timeline;
  timeline.total.assign(n, RiskTriple{});
  timeline.per_agent.reserve(other_tracks.size());
  for (const auto & other : other_tracks) {
    std::vector<RiskTriple> series(n);
    for (std::size_t k = 0; k < n; ++k) {
      series[k] = pairwise_risk(target_track.states[k], other.states[k], drf, cost, rho_cap);
    }
    timeline.per_agent.push_back(std::move(series));
  }
  for (std::size_t k = 0; k < n; ++k) {
    RiskTriple sum;
    for (const auto & series : timeline.per_agent) {
      sum.probability += series[k].probability;
      sum.cost += series[k].cost;
      sum.risk += series[k].risk;
    }
    sum.risk = std::min(kCollisionRisk, sum.risk);
    timeline.total[k] = sum;
  }
  return timeline;
}

}  // namespace scrisk::risk
