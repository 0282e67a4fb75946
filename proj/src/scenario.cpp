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
#include <cstdio>
#include <cstdlib>
#include <thread>

namespace scrisk::sim
{

namespace
{

constexpr int kEgoId = 0;
constexpr int kDesignatedTriggerId = 1;
constexpr std::size_t kWarmupFrames = 100;
constexpr std::size_t kTriggerBudgetFrames = 80;
constexpr double kTeleportLimit = 5.0;
constexpr double kMapRadius = 120.0;

bool is_lateral(ConflictType type) { return type != ConflictType::kRearEnd; }

// longitudinal offset of `v` ahead of the ego (centers, along the road)
double ahead_of(const Vehicle & v, const Vehicle & ego) { return v.s - ego.s; }

Vehicle make_vehicle(int id, double s, int lane, double speed, const RoadNetwork & road, Rng & rng)
{
  Vehicle v;
  v.id = id;
  v.s = s;
  v.lane = lane;
  v.d = road.lane_center(lane, s);
  v.v = speed;
  v.length = std::clamp(rng.normal(4.6, 0.3), 4.0, 5.2);
  v.width = std::clamp(rng.normal(1.85, 0.08), 1.7, 2.0);
  v.mass = std::clamp(rng.normal(1500.0, 150.0), 1100.0, 2000.0);
  v.idm.desired_speed = speed;
  return v;
}

struct EpisodePlan
{
  double ego_speed = 22.0;
  Maneuver maneuver = Maneuver::kBrakeOnly;
  double reaction_delay = 0.8;
  double ego_brake = 6.5;
  double steer_duration = 2.5;
  double second_action_delay = 0.6;
  double ego_headway = 1.0;
  double threshold = 0.0;
  double trigger_excess = 1.0;
  double trigger_release_fraction = 0.0;
  double cut_in_offset = 6.0;
  double cut_in_slowdown = 3.0;
  double cut_in_decel = 1.5;
  double merge_position = 50.0;
};

EpisodePlan sample_plan(const HazardConfig & cfg, ConflictType conflict, const EpisodeOverrides & ov, Rng & rng)
{
  EpisodePlan p;
  // every draw happens unconditionally so overrides never shift the stream
  const double ego_speed = std::clamp(rng.normal(22.0, 3.0), 14.0, 30.0);
  const auto maneuver = kManeuvers[rng.categorical(cfg.maneuver_mix)];
  const double delay = cfg.reaction_delay.sample(rng);
  const double brake = std::clamp(rng.normal(6.5, 1.5), 3.0, 9.5);
  p.steer_duration = std::clamp(rng.normal(2.5, 0.5), 1.5, 4.0);
  p.second_action_delay = rng.uniform(0.3, 1.0);
  p.ego_headway = std::clamp(rng.normal(1.0, 0.3), 0.5, 1.8);
  const double decel_threshold = cfg.decel_threshold.sample(rng);
  const double lateral_threshold = cfg.lane_offset_threshold.sample(rng);
  p.trigger_excess = rng.uniform(0.5, 2.0);
  p.trigger_release_fraction = rng.bernoulli(0.5) ? 0.0 : rng.uniform(0.0, 0.5);
  p.cut_in_offset = rng.uniform(2.0, 14.0);
  p.cut_in_slowdown = rng.uniform(2.0, 8.0);
  p.cut_in_decel = rng.uniform(0.5, 3.0);
  p.merge_position = rng.uniform(20.0, 80.0);

  p.ego_speed = ov.ego_speed.value_or(ego_speed);
  p.maneuver = ov.maneuver.value_or(maneuver);
  p.reaction_delay = ov.reaction_delay.value_or(delay);
  p.ego_brake = ov.ego_brake_decel.value_or(brake);
  p.threshold = conflict == ConflictType::kRearEnd ? decel_threshold : lateral_threshold;
  return p;
}

bool slot_free(const std::vector<Vehicle> & placed, int lane, double s, double spacing)
{
  return std::none_of(placed.begin(), placed.end(), [&](const Vehicle & v) {
    return v.lane == lane && std::abs(v.s - s) < spacing;
  });
}

// windows reserved for the hazard-trigger candidates
bool in_trigger_window(ConflictType conflict, int lane, int ego_lane, int trigger_lane, double rel)
{
  switch (conflict) {
    case ConflictType::kRearEnd:
      return lane == ego_lane && rel > -25.0;
    case ConflictType::kCutIn:
    case ConflictType::kMerging:
      return (lane == trigger_lane && rel > -35.0 && rel < 45.0) || (lane == ego_lane && rel > -25.0 && rel < 60.0);
  }
  return false;
}

int escape_lane(ConflictType conflict, int ego_lane, int trigger_lane, const RoadNetwork & road)
{
  switch (conflict) {
    case ConflictType::kRearEnd:
      return ego_lane + 1 < road.num_lanes ? ego_lane + 1 : ego_lane - 1;
    case ConflictType::kCutIn:
      return ego_lane + (ego_lane - trigger_lane);
    case ConflictType::kMerging:
      return ego_lane + 1;
  }
  return ego_lane + 1;
}

void check_anomalies(const std::vector<std::vector<geometry::AgentState>> & frames)
{
  for (std::size_t k = 0; k < frames.size(); ++k) {
    for (std::size_t i = 0; i < frames[k].size(); ++i) {
      const auto & st = frames[k][i];
      if (!std::isfinite(st.x) || !std::isfinite(st.y) || !std::isfinite(st.heading) ||
          !std::isfinite(st.speed) || !std::isfinite(st.yaw_rate) || !std::isfinite(st.accel)) {
        throw AnomalousEpisode("non-finite state");
      }
      if (k > 0 && (st.position() - frames[k - 1][i].position()).norm() > kTeleportLimit) {
        throw AnomalousEpisode("teleport exceeding 5 m per frame");
      }
    }
  }
}

geometry::AgentState quantized(geometry::AgentState st)
{
  st.x = quantize(st.x);
  st.y = quantize(st.y);
  st.heading = quantize(st.heading);
  st.speed = quantize(st.speed);
  st.yaw_rate = quantize(st.yaw_rate);
  st.accel = quantize(st.accel);
  st.length = quantize(st.length);
  st.width = quantize(st.width);
  st.mass = quantize(st.mass);
  return st;
}

risk::RiskTriple quantized(risk::RiskTriple r)
{
  return {quantize(r.probability), quantize(r.cost), quantize(r.risk)};
}

}  // namespace

double quantize(double value)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return std::strtod(buf, nullptr);
}

std::string to_string(ConflictType type)
{
  switch (type) {
    case ConflictType::kCutIn:
      return "cut_in";
    case ConflictType::kMerging:
      return "merging";
    case ConflictType::kRearEnd:
      return "rear_end";
  }
  return "unknown";
}

std::string to_string(Maneuver maneuver)
{
  switch (maneuver) {
    case Maneuver::kBrakeThenSteer:
      return "brake_then_steer";
    case Maneuver::kSteerThenBrake:
      return "steer_then_brake";
    case Maneuver::kSteerOnly:
      return "steer_only";
    case Maneuver::kBrakeOnly:
      return "brake_only";
  }
  return "unknown";
}

ConflictType conflict_from_string(const std::string & name)
{
  for (auto t : kConflictTypes) {
    if (to_string(t) == name) {
      return t;
    }
  }
  throw FormatError("unknown conflict type '" + name + "'");
}

Maneuver maneuver_from_string(const std::string & name)
{
  for (auto m : kManeuvers) {
    if (to_string(m) == name) {
      return m;
    }
  }
  throw FormatError("unknown maneuver '" + name + "'");
}

double ClippedGaussian::sample(Rng & rng) const
{
  return std::clamp(rng.normal(mean, stddev), min, max);
}

void validate(const HazardConfig & c)
{
  const auto check_dist = [](const ClippedGaussian & g, const char * name) {
    if (!(g.stddev >= 0.0) || !std::isfinite(g.mean) || g.min > g.max) {
      throw ConfigError(std::string("hazard.") + name + ": stddev must be >= 0 and min <= max");
    }
  };
  check_dist(c.decel_threshold, "decel_threshold");
  check_dist(c.lane_offset_threshold, "lane_offset_threshold");
  check_dist(c.reaction_delay, "reaction_delay");
  if (!(c.decel_threshold.min >= 0.0) || !(c.lane_offset_threshold.min >= 0.0) ||
      !(c.reaction_delay.min >= 0.0)) {
    throw ConfigError("hazard: clipped minima must be >= 0");
  }
  const auto check_mix = [](const auto & mix, const char * name) {
    double sum = 0.0;
    for (double p : mix) {
      if (!(p >= 0.0)) {
        throw ConfigError(std::string("hazard.") + name + ": proportions must be >= 0");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError(std::string("hazard.") + name + ": proportions must sum to 1");
    }
  };
  check_mix(c.maneuver_mix, "maneuver_mix");
  check_mix(c.conflict_mix, "conflict_mix");
  if (!(c.candidate_radius > 0.0)) {
    throw ConfigError("hazard.candidate_radius must be positive");
  }
}

const AgentTrack & SceneRecord::target() const
{
  for (const auto & a : agents) {
    if (a.id == target_agent_id) {
      return a;
    }
  }
  throw FormatError("scene " + scene_id + " has no target agent");
}

const RoadNetwork & RoadLibrary::for_conflict(ConflictType type) const
{
  switch (type) {
    case ConflictType::kCutIn:
      return straight;
    case ConflictType::kMerging:
      return merge;
    case ConflictType::kRearEnd:
      return curved;
  }
  return straight;
}

SceneRecord run_episode(
  const HazardConfig & cfg, const RiskParams & risk_params, const RoadNetwork & road,
  ConflictType conflict, std::uint64_t seed, const EpisodeOverrides & ov)
{
  validate(cfg);
  if (conflict == ConflictType::kMerging && !road.has_ramp()) {
    throw ConfigError("merging conflicts need a road with an on-ramp");
  }
  if (conflict == ConflictType::kCutIn && road.num_lanes < 2) {
    throw ConfigError("cut-in conflicts need at least two lanes");
  }
  Rng rng(seed);
  const EpisodePlan plan = sample_plan(cfg, conflict, ov, rng);

  // lanes
  int ego_lane = 0;
  int trigger_lane = 0;
  switch (conflict) {
    case ConflictType::kRearEnd:
      ego_lane = static_cast<int>(rng.below(static_cast<std::uint64_t>(road.num_lanes)));
      trigger_lane = ego_lane;
      break;
    case ConflictType::kCutIn: {
      ego_lane = static_cast<int>(rng.below(static_cast<std::uint64_t>(road.num_lanes)));
      if (ego_lane == 0) {
        trigger_lane = 1;
      } else if (ego_lane == road.num_lanes - 1) {
        trigger_lane = ego_lane - 1;
      } else {
        trigger_lane = ego_lane + (rng.bernoulli(0.5) ? 1 : -1);
      }
      break;
    }
    case ConflictType::kMerging:
      ego_lane = 0;
      trigger_lane = -1;
      break;
  }

  const double warmup_time = static_cast<double>(kWarmupFrames) * kStepSeconds;
  double ego_s0 = 150.0;
  if (conflict == ConflictType::kMerging) {
    ego_s0 = std::max(10.0, road.ramp_join + plan.merge_position - warmup_time * plan.ego_speed);
  }

  World world;
  world.road = &road;
  Vehicle ego = make_vehicle(kEgoId, ego_s0, ego_lane, plan.ego_speed, road, rng);
  ego.idm.time_headway = plan.ego_headway;
  ego.idm.desired_speed = plan.ego_speed * rng.uniform(1.03, 1.12);
  ego.idm_min_accel = -2.0;
  ego.lane_changes_allowed = false;
  ego.accel_noise_sigma = 0.35;
  ego.lateral_noise_sigma = 0.08;
  if (ov.isolated) {
    ego.mode = LongitudinalMode::kCruise;
    ego.accel_noise_sigma = 0.0;
    ego.lateral_noise_sigma = 0.0;
  }

  Vehicle trigger = make_vehicle(kDesignatedTriggerId, ego_s0, trigger_lane, plan.ego_speed, road, rng);
  trigger.lane_changes_allowed = false;
  trigger.accel_noise_sigma = ov.isolated ? 0.0 : 0.1;
  if (conflict == ConflictType::kRearEnd) {
    const double gap = ov.trigger_gap.value_or(plan.ego_speed * plan.ego_headway + rng.uniform(0.0, 10.0));
    trigger.s = ego.s + gap + 0.5 * (ego.length + trigger.length);
    trigger.mode = LongitudinalMode::kCruise;
  } else {
    trigger.s = ego.s + plan.cut_in_offset;
    trigger.mode = LongitudinalMode::kShadow;
    trigger.shadow_of = kEgoId;
    trigger.shadow_offset = plan.cut_in_offset;
  }
  trigger.d = road.lane_center(trigger_lane, trigger.s);
  world.vehicles.push_back(ego);
  world.vehicles.push_back(trigger);

  const std::size_t n_background = ov.isolated ? 0 : 2 + rng.below(4);
  for (std::size_t i = 0; i < n_background; ++i) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const int lane = static_cast<int>(rng.below(static_cast<std::uint64_t>(road.num_lanes)));
      const double rel = rng.uniform(-70.0, 90.0);
      const double speed = std::max(5.0, plan.ego_speed + rng.normal(0.0, 2.0));
      const double desired = speed * rng.uniform(1.0, 1.1);
      if (in_trigger_window(conflict, lane, ego_lane, trigger_lane, rel) ||
          !slot_free(world.vehicles, lane, ego.s + rel, 20.0)) {
        continue;
      }
      Vehicle bg = make_vehicle(static_cast<int>(world.vehicles.size()), ego.s + rel, lane, speed, road, rng);
      bg.idm.desired_speed = desired;
      bg.idm.time_headway = rng.uniform(1.0, 1.8);
      bg.accel_noise_sigma = 0.15;
      bg.lateral_noise_sigma = 0.05;
      world.vehicles.push_back(bg);
      break;
    }
  }
  for (auto & v : world.vehicles) {
    refresh_state(road, v, nullptr, kStepSeconds);
  }

  std::vector<std::vector<geometry::AgentState>> frames;
  const auto record = [&]() {
    std::vector<geometry::AgentState> row;
    row.reserve(world.vehicles.size());
    for (const auto & v : world.vehicles) {
      row.push_back(v.state);
    }
    frames.push_back(std::move(row));
  };
  const auto any_crash = [&]() {
    return std::any_of(world.vehicles.begin(), world.vehicles.end(), [](const Vehicle & v) {
      return v.mode == LongitudinalMode::kCrashed;
    });
  };

  record();
  for (std::size_t f = 0; f < kWarmupFrames; ++f) {
    step_traffic(world, kStepSeconds, rng);
    record();
  }
  if (any_crash()) {
    throw AnomalousEpisode("collision during warm-up");
  }

  // hazard trigger
  const Vehicle & ego_now = *world.find(kEgoId);
  const auto eligible = [&](const Vehicle & v) {
    const double rel = ahead_of(v, ego_now);
    switch (conflict) {
      case ConflictType::kRearEnd:
        return v.lane == ego_now.lane && rel > 0.0;
      case ConflictType::kCutIn:
        return std::abs(v.lane - ego_now.lane) == 1 && rel > -5.0 && rel < 25.0;
      case ConflictType::kMerging:
        return v.lane == -1 && rel > -5.0 && rel < 25.0;
    }
    return false;
  };
  const int trigger_id = select_hazard_trigger(world, kEgoId, risk_params, cfg.candidate_radius, eligible);
  {
    Vehicle & trig = *world.find(trigger_id);
    trig.lane_changes_allowed = false;
    trig.mode = LongitudinalMode::kBrake;
    trig.brake_jerk = 15.0;
    if (conflict == ConflictType::kRearEnd) {
      trig.brake_target = ov.trigger_decel.value_or(std::min(9.5, plan.threshold + plan.trigger_excess));
      trig.brake_release_speed = ov.trigger_final_speed.value_or(trig.v * plan.trigger_release_fraction);
    } else {
      const double peak_rate = plan.threshold + 0.2 + 0.4 * plan.trigger_excess;
      const double width = std::abs(road.lane_center(ego_now.lane, trig.s) - road.lane_center(trig.lane, trig.s));
      trig.lateral = LateralPlan{true, trig.lane, ego_now.lane, world.time, 1.875 * width / peak_rate};
      trig.brake_target = ov.trigger_decel.value_or(plan.cut_in_decel);
      trig.brake_release_speed =
        ov.trigger_final_speed.value_or(std::max(0.0, trig.v - plan.cut_in_slowdown));
    }
  }

  // run until the trigger crosses its threshold
  std::size_t hazard = 0;
  for (std::size_t f = 0; f < kTriggerBudgetFrames && hazard == 0; ++f) {
    const double prev_speed = world.find(trigger_id)->state.speed;
    step_traffic(world, kStepSeconds, rng);
    record();
    const Vehicle & trig = *world.find(trigger_id);
    const double realized = is_lateral(conflict) ? std::abs(trig.d_rate) : (prev_speed - trig.state.speed) / kStepSeconds;
    if (realized > plan.threshold) {
      hazard = world.frame;
    }
  }
  if (hazard == 0) {
    throw TriggerFailed("hazard-triggering vehicle never crossed its threshold");
  }
  if (any_crash()) {
    throw AnomalousEpisode("collision before the hazard frame");
  }

  // scripted ego avoidance
  const std::size_t onset = hazard + static_cast<std::size_t>(std::lround(plan.reaction_delay / kStepSeconds));
  const std::size_t second =
    onset + static_cast<std::size_t>(std::lround(plan.second_action_delay / kStepSeconds));
  const int ego_escape = escape_lane(conflict, world.find(kEgoId)->lane, world.find(trigger_id)->lane, road);
  const double ego_release = world.find(kEgoId)->v * rng.uniform(0.0, 0.6);
  std::size_t brake_frame = 0;
  std::size_t steer_frame = 0;
  switch (plan.maneuver) {
    case Maneuver::kBrakeThenSteer:
      brake_frame = onset;
      steer_frame = second;
      break;
    case Maneuver::kSteerThenBrake:
      steer_frame = onset;
      brake_frame = second;
      break;
    case Maneuver::kSteerOnly:
      steer_frame = onset;
      break;
    case Maneuver::kBrakeOnly:
      brake_frame = onset;
      break;
  }

  const std::size_t last_frame = hazard + kHalfWindow;
  while (world.frame < last_frame) {
    Vehicle & e = *world.find(kEgoId);
    if (e.mode != LongitudinalMode::kCrashed) {
      if (world.frame == onset) {
        e.idm_min_accel = -3.0;
        if (e.mode == LongitudinalMode::kCruise) {
          e.mode = LongitudinalMode::kIdm;
        }
      }
      if (brake_frame != 0 && world.frame == brake_frame) {
        e.mode = LongitudinalMode::kBrake;
        e.brake_target = plan.ego_brake;
        e.brake_jerk = 20.0;
        e.brake_release_speed = plan.maneuver == Maneuver::kBrakeOnly && ov.ego_brake_decel ? 0.0 : ego_release;
        e.brake_combines_idm = true;
      }
      if (steer_frame != 0 && world.frame == steer_frame && !e.lateral.active) {
        e.lateral = LateralPlan{true, e.lane, ego_escape, world.time, plan.steer_duration};
      }
    }
    step_traffic(world, kStepSeconds, rng);
    record();
  }

  // retain the window around the hazard
  const std::size_t first = hazard - kHalfWindow;
  std::vector<std::vector<geometry::AgentState>> window(frames.begin() + static_cast<long>(first),
                                                       frames.begin() + static_cast<long>(last_frame + 1));
  check_anomalies(window);

  SceneRecord rec;
  char id_buf[32];
  std::snprintf(id_buf, sizeof(id_buf), "scene-%016llx", static_cast<unsigned long long>(seed));
  rec.scene_id = id_buf;
  rec.conflict_type = conflict;
  rec.frequency = geometry::kDefaultFrequency;
  rec.hazard_frame = kHalfWindow;
  rec.target_agent_id = kEgoId;
  rec.trigger_agent_id = trigger_id;
  rec.maneuver = plan.maneuver;
  rec.hazard_threshold = quantize(plan.threshold);

  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    AgentTrack track;
    track.id = world.vehicles[i].id;
    track.track.start_time = -static_cast<double>(kHalfWindow) * kStepSeconds;
    track.track.frequency = geometry::kDefaultFrequency;
    track.track.states.reserve(window.size());
    for (const auto & row : window) {
      track.track.states.push_back(quantized(row[i]));
    }
    rec.agents.push_back(std::move(track));
  }

  // labels on the stored (quantized) tracks
  const auto & target = rec.agents.front().track;
  std::vector<geometry::Trajectory> others;
  for (std::size_t i = 1; i < rec.agents.size(); ++i) {
    others.push_back(rec.agents[i].track);
  }
  for (std::size_t i = 0; i < others.size(); ++i) {
    for (std::size_t k = 0; k <= kHalfWindow; ++k) {
      if (geometry::obb_overlap(target.states[k], others[i].states[k])) {
        throw AnomalousEpisode("target overlaps another agent at or before the hazard frame");
      }
    }
    auto hit = geometry::first_collision(target, others[i], rec.target_agent_id, rec.agents[i + 1].id);
    if (hit && (!rec.collision || hit->frame < rec.collision->frame)) {
      hit->relative_speed = quantize(hit->relative_speed);
      rec.collision = hit;
    }
  }

  rec.risk = risk::scene_risk_history(target, others, risk_params.drf, risk_params.cost, risk_params.rho_cap);
  for (auto & series : rec.risk.per_agent) {
    for (auto & r : series) {
      r = quantized(r);
    }
  }
  for (auto & r : rec.risk.total) {
    r = quantized(r);
  }

  const auto center = target.states[kHalfWindow].position();
  for (auto seg : map_excerpt(road, center, kMapRadius).lanes) {
    for (auto & p : seg.centerline) {
      p = {quantize(p.x), quantize(p.y)};
    }
    rec.map.push_back(std::move(seg));
  }
  return rec;
}

GeneratedDataset generate_dataset(
  const HazardConfig & config, const RiskParams & risk, const RoadLibrary & roads,
  std::uint64_t seed, std::size_t n_episodes, unsigned threads)
{
  validate(config);
  GeneratedDataset out;
  if (n_episodes == 0) {
    return out;
  }
  struct Attempt
  {
    std::uint64_t seed = 0;
    std::optional<SceneRecord> scene;
    std::string reason;
  };
  const auto run_attempt = [&](std::size_t index) {
    Attempt a;
    a.seed = derive_seed(seed, index);
    Rng pick(a.seed);
    const auto conflict = kConflictTypes[pick.categorical(config.conflict_mix)];
    try {
      a.scene = run_episode(config, risk, roads.for_conflict(conflict), conflict, derive_seed(a.seed, 0));
    } catch (const Error & e) {
      a.reason = e.what();
    }
    return a;
  };

  threads = std::max(1u, threads);
  const std::size_t max_attempts = 4 * n_episodes;
  std::size_t next = 0;
  while (out.scenes.size() < n_episodes && next < max_attempts) {
    const std::size_t batch = std::min(max_attempts - next, n_episodes - out.scenes.size());
    std::vector<Attempt> results(batch);
    if (threads == 1 || batch == 1) {
      for (std::size_t i = 0; i < batch; ++i) {
        results[i] = run_attempt(next + i);
      }
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
          for (std::size_t i = t; i < batch; i += threads) {
            results[i] = run_attempt(next + i);
          }
        });
      }
      for (auto & th : pool) {
        th.join();
      }
    }
    for (std::size_t i = 0; i < batch; ++i) {
      if (results[i].scene) {
        out.scenes.push_back(std::move(*results[i].scene));
        out.seeds.push_back(results[i].seed);
      } else {
        out.discarded.push_back({next + i, results[i].seed, results[i].reason});
      }
    }
    next += batch;
  }
  return out;
}

}  // namespace scrisk::sim
