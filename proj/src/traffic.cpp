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

#include "scrisk/errors.hpp"
#include "scrisk/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scrisk::sim
{

namespace
{

constexpr double kCrashDecel = 8.0;
constexpr double kMaxDecel = 9.0;
constexpr double kNoiseTimeConstant = 1.0;
constexpr double kLaneChangeDuration = 4.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double min_jerk(double u)
{
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

struct Neighbor
{
  const Vehicle * vehicle = nullptr;
  double gap = kInf;
};

bool in_corridor(const Vehicle & self, double d_self, const Vehicle & other)
{
  return std::abs(other.d - d_self) < 0.5 * (self.width + other.width) + 0.3;
}

// nearest vehicle ahead whose footprint overlaps the corridor centered at d_self
Neighbor leader_in(const World & world, const Vehicle & self, double d_self)
{
  Neighbor best;
  for (const auto & other : world.vehicles) {
    if (other.id == self.id || other.s <= self.s || !in_corridor(self, d_self, other)) {
      continue;
    }
    const double gap = other.s - self.s - 0.5 * (self.length + other.length);
    if (gap < best.gap) {
      best = {&other, gap};
    }
  }
  return best;
}

Neighbor follower_in(const World & world, const Vehicle & self, double d_self)
{
  Neighbor best;
  for (const auto & other : world.vehicles) {
    if (other.id == self.id || other.s > self.s || !in_corridor(self, d_self, other)) {
      continue;
    }
    const double gap = self.s - other.s - 0.5 * (self.length + other.length);
    if (gap < best.gap) {
      best = {&other, gap};
    }
  }
  return best;
}

double car_following(const World & world, const Vehicle & v)
{
  Neighbor lead = leader_in(world, v, v.d);
  if (v.lateral.active) {
    const Neighbor target = leader_in(world, v, world.road->lane_center(v.lateral.to_lane, v.s));
    if (target.gap < lead.gap) {
      lead = target;
    }
  }
  const double leader_speed = lead.vehicle ? lead.vehicle->v : v.v;
  return idm_acceleration(v.idm, v.v, lead.gap, leader_speed);
}

void ou_update(double & x, double sigma, double dt, Rng & rng)
{
  if (sigma <= 0.0) {
    return;
  }
  x += -x * dt / kNoiseTimeConstant + sigma * std::sqrt(2.0 * dt / kNoiseTimeConstant) * rng.normal();
}

// gap-acceptance lane change: a slow leader and an adjacent lane with safe gaps
void consider_lane_change(const World & world, Vehicle & v)
{
  const RoadNetwork & road = *world.road;
  const Neighbor lead = leader_in(world, v, v.d);
  if (!lead.vehicle || lead.gap > 50.0 || lead.vehicle->v > v.idm.desired_speed - 2.0) {
    return;
  }
  for (int dir : {1, -1}) {
    const int lane = v.lane + dir;
    if (lane < 0 || lane >= road.num_lanes) {
      continue;
    }
    const double d_target = road.lane_center(lane, v.s);
    const Neighbor new_lead = leader_in(world, v, d_target);
    const Neighbor new_lag = follower_in(world, v, d_target);
    const bool lead_ok = new_lead.gap > 15.0 + 0.5 * v.v &&
                         (!new_lead.vehicle || new_lead.vehicle->v > lead.vehicle->v + 1.0);
    const bool lag_ok =
      !new_lag.vehicle ||
      (new_lag.gap > 10.0 + 0.5 * new_lag.vehicle->v && new_lag.vehicle->v - v.v < 4.0);
    if (lead_ok && lag_ok) {
      v.lateral = LateralPlan{true, v.lane, lane, world.time, kLaneChangeDuration};
      return;
    }
  }
}

}  // namespace

double idm_acceleration(const IdmParams & p, double speed, double gap, double leader_speed)
{
  const double free_term = std::pow(speed / p.desired_speed, p.delta);
  if (!std::isfinite(gap)) {
    return p.max_accel * (1.0 - free_term);
  }
  if (gap <= 0.0) {
    return -kMaxDecel;
  }
  const double dv = speed - leader_speed;
  const double desired_gap =
    p.min_gap + std::max(0.0, speed * p.time_headway + speed * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
  const double ratio = desired_gap / gap;
  return std::max(-kMaxDecel, p.max_accel * (1.0 - free_term - ratio * ratio));
}

double idm_equilibrium_gap(const IdmParams & p, double speed)
{
  return (p.min_gap + speed * p.time_headway) / std::sqrt(1.0 - std::pow(speed / p.desired_speed, p.delta));
}

Vehicle * World::find(int id)
{
  for (auto & v : vehicles) {
    if (v.id == id) {
      return &v;
    }
  }
  return nullptr;
}

const Vehicle * World::find(int id) const
{
  return const_cast<World *>(this)->find(id);
}

void refresh_state(const RoadNetwork & road, Vehicle & v, const geometry::AgentState * prev, double dt)
{
  const double tangential = v.v * (1.0 - road.curvature() * v.d);
  const auto pos = road.to_world(v.s, v.d);
  geometry::AgentState st;
  st.x = pos.x;
  st.y = pos.y;
  st.heading = road.heading_at(v.s) + std::atan2(v.d_rate, tangential);
  st.speed = std::hypot(tangential, v.d_rate);
  st.length = v.length;
  st.width = v.width;
  st.mass = v.mass;
  if (prev) {
    st.yaw_rate = geometry::normalize_angle(st.heading - prev->heading) / dt;
    st.accel = (st.speed - prev->speed) / dt;
  } else {
    st.yaw_rate = road.curvature() * tangential;
    st.accel = v.accel;
  }
  v.state = st;
}

void step_traffic(World & world, double dt, Rng & rng)
{
  if (world.vehicles.empty()) {
    return;
  }
  const RoadNetwork & road = *world.road;
  std::sort(world.vehicles.begin(), world.vehicles.end(), [](const auto & a, const auto & b) {
    return a.id < b.id;
  });

  // accelerations from the current (pre-step) world
  std::vector<double> accel(world.vehicles.size(), 0.0);
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    Vehicle & v = world.vehicles[i];
    double a = 0.0;
    switch (v.mode) {
      case LongitudinalMode::kIdm:
        a = std::max(car_following(world, v), v.idm_min_accel);
        break;
      case LongitudinalMode::kCruise:
        a = 0.0;
        break;
      case LongitudinalMode::kShadow: {
        const Vehicle * ref = world.find(v.shadow_of);
        if (ref) {
          const double err = ref->s + v.shadow_offset - v.s;
          a = std::clamp(0.8 * err + 1.5 * (ref->v - v.v), -3.0, 2.0);
        }
        break;
      }
      case LongitudinalMode::kBrake:
        if (v.v <= v.brake_release_speed) {
          v.brake_applied = 0.0;
          a = 0.0;
        } else {
          v.brake_applied = std::min(v.brake_target, v.brake_applied + v.brake_jerk * dt);
          a = -v.brake_applied;
        }
        if (v.brake_combines_idm) {
          a = std::min(a, std::max(car_following(world, v), v.idm_min_accel));
        }
        break;
      case LongitudinalMode::kCrashed:
        a = -kCrashDecel;
        break;
    }
    if (v.mode != LongitudinalMode::kCrashed) {
      ou_update(v.accel_noise, v.accel_noise_sigma, dt, rng);
      a += v.accel_noise;
    }
    accel[i] = a;
  }

  // lane-change decisions, staggered to once per second per vehicle
  for (auto & v : world.vehicles) {
    if (v.lane_changes_allowed && v.mode == LongitudinalMode::kIdm && !v.lateral.active &&
        (world.frame + static_cast<std::size_t>(v.id)) % 20 == 0) {
      consider_lane_change(world, v);
    }
  }

  const double t_next = world.time + dt;
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    Vehicle & v = world.vehicles[i];
    const double v_new = std::max(0.0, v.v + accel[i] * dt);
    v.accel = (v_new - v.v) / dt;
    v.s += 0.5 * (v.v + v_new) * dt;
    v.v = v_new;

    const double d_old = v.d;
    if (v.mode == LongitudinalMode::kCrashed) {
      v.d_rate = 0.0;
      continue;
    }
    ou_update(v.lateral_noise, v.lateral_noise_sigma, dt, rng);
    if (v.lateral.active) {
      const double u = (t_next - v.lateral.start_time) / v.lateral.duration;
      const double w = min_jerk(u);
      v.d = (1.0 - w) * road.lane_center(v.lateral.from_lane, v.s) +
            w * road.lane_center(v.lateral.to_lane, v.s) + v.lateral_offset + v.lateral_noise;
      if (u >= 1.0) {
        v.lateral.active = false;
        v.lane = v.lateral.to_lane;
      }
    } else {
      v.d = road.lane_center(v.lane, v.s) + v.lateral_offset + v.lateral_noise;
    }
    v.d_rate = (v.d - d_old) / dt;
  }

  world.time = t_next;
  world.frame += 1;
  for (auto & v : world.vehicles) {
    const auto prev = v.state;
    refresh_state(road, v, &prev, dt);
  }
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < world.vehicles.size(); ++j) {
      auto & a = world.vehicles[i];
      auto & b = world.vehicles[j];
      if (geometry::obb_overlap(a.state, b.state)) {
        a.mode = LongitudinalMode::kCrashed;
        b.mode = LongitudinalMode::kCrashed;
        a.lateral.active = false;
        b.lateral.active = false;
      }
    }
  }
}

int select_hazard_trigger(
  const World & world, int ego_id, const RiskParams & risk, double radius,
  const std::function<bool(const Vehicle &)> & eligible)
{
  const Vehicle * ego = world.find(ego_id);
  if (!ego) {
    throw NoCandidate("ego vehicle not present");
  }
  std::vector<const Vehicle *> order;
  for (const auto & v : world.vehicles) {
    order.push_back(&v);
  }
  std::sort(order.begin(), order.end(), [](auto a, auto b) { return a->id < b->id; });

  int best_id = -1;
  double best_risk = -1.0;
  for (const Vehicle * v : order) {
    if (v->id == ego_id) {
      continue;
    }
    if ((v->state.position() - ego->state.position()).norm() > radius) {
      continue;
    }
    if (eligible && !eligible(*v)) {
      continue;
    }
    const double r = risk::pairwise_risk(ego->state, v->state, risk.drf, risk.cost, risk.rho_cap).risk;
    if (r > best_risk) {
      best_risk = r;
      best_id = v->id;
    }
  }
  if (best_id < 0) {
    throw NoCandidate("no background vehicle within " + std::to_string(radius) + " m of the ego");
  }
  return best_id;
}

}  // namespace scrisk::sim
