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

#ifndef SCRISK__SCENARIO_HPP_
#define SCRISK__SCENARIO_HPP_

#include "scrisk/geometry.hpp"
#include "scrisk/risk_field.hpp"
#include "scrisk/rng.hpp"
#include "scrisk/road.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace scrisk::sim
{

inline constexpr double kStepSeconds = 0.05;
/// Frames kept on each side of the hazard frame.
inline constexpr std::size_t kHalfWindow = 100;
inline constexpr std::size_t kSceneFrames = 2 * kHalfWindow + 1;

enum class ConflictType { kCutIn = 0, kMerging = 1, kRearEnd = 2 };
enum class Maneuver { kBrakeThenSteer = 0, kSteerThenBrake = 1, kSteerOnly = 2, kBrakeOnly = 3 };

inline constexpr std::array<ConflictType, 3> kConflictTypes = {
  ConflictType::kCutIn, ConflictType::kMerging, ConflictType::kRearEnd};
inline constexpr std::array<Maneuver, 4> kManeuvers = {
  Maneuver::kBrakeThenSteer, Maneuver::kSteerThenBrake, Maneuver::kSteerOnly, Maneuver::kBrakeOnly};

std::string to_string(ConflictType type);
std::string to_string(Maneuver maneuver);
ConflictType conflict_from_string(const std::string & name);
Maneuver maneuver_from_string(const std::string & name);

/// Normal distribution clipped to [min, max].
struct ClippedGaussian
{
  double mean = 0.0;
  double stddev = 1.0;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();

  double sample(Rng & rng) const;
};

struct HazardConfig
{
  ClippedGaussian decel_threshold{6.0, 1.0, 2.0};           ///< m/s^2
  ClippedGaussian lane_offset_threshold{1.0, 0.2, 0.3};     ///< m/s
  ClippedGaussian reaction_delay{0.8, 0.25, 0.3};           ///< s
  /// brake_then_steer, steer_then_brake, steer_only, brake_only
  std::array<double, 4> maneuver_mix{0.41, 0.20, 0.34, 0.05};
  /// cut_in, merging, rear_end
  std::array<double, 3> conflict_mix{0.60, 0.18, 0.22};
  double candidate_radius = 60.0;  ///< m, hazard-trigger search radius around the ego
};

void validate(const HazardConfig & config);

struct RiskParams
{
  risk::DrfParams drf;
  risk::CostParams cost;
  double rho_cap = 1.0;
};

// ---------------------------------------------------------------------------
// traffic world

struct IdmParams
{
  double desired_speed = 25.0;
  double time_headway = 1.2;
  double min_gap = 2.0;
  double max_accel = 1.5;
  double comfort_decel = 2.0;
  double delta = 4.0;
};

/// Intelligent Driver Model acceleration for a vehicle at `speed` following a
/// leader `gap` metres ahead (bumper to bumper) at `leader_speed`. An infinite
/// gap is free road.
double idm_acceleration(const IdmParams & p, double speed, double gap, double leader_speed);
/// Gap at which the IDM acceleration is zero when following at equal speed.
double idm_equilibrium_gap(const IdmParams & p, double speed);

enum class LongitudinalMode {
  kIdm,     ///< car following
  kCruise,  ///< hold speed
  kShadow,  ///< hold a longitudinal offset to another vehicle
  kBrake,   ///< jerk-limited braking toward a target deceleration
  kCrashed  ///< post-impact stop
};

struct LateralPlan
{
  bool active = false;
  int from_lane = 0;
  int to_lane = 0;
  double start_time = 0.0;
  double duration = 4.0;
};

struct Vehicle
{
  int id = 0;
  double s = 0.0;
  double d = 0.0;
  double v = 0.0;  ///< rate of s
  double length = 4.6;
  double width = 1.85;
  double mass = 1500.0;
  int lane = 0;
  IdmParams idm;
  LongitudinalMode mode = LongitudinalMode::kIdm;
  /// lower clip on the car-following acceleration (drivers not yet braking hard)
  double idm_min_accel = -9.0;
  bool lane_changes_allowed = true;
  LateralPlan lateral;
  double lateral_offset = 0.0;  ///< deviation from the lane center outside lane changes

  // kShadow
  int shadow_of = -1;
  double shadow_offset = 0.0;
  // kBrake
  double brake_target = 0.0;
  double brake_jerk = 15.0;
  double brake_release_speed = 0.0;
  double brake_applied = 0.0;
  bool brake_combines_idm = false;

  // noise: OU processes on acceleration and lateral offset
  double accel_noise_sigma = 0.0;
  double lateral_noise_sigma = 0.0;
  double accel_noise = 0.0;
  double lateral_noise = 0.0;

  double accel = 0.0;
  double d_rate = 0.0;
  geometry::AgentState state;  ///< world state after the last step
};

struct World
{
  const RoadNetwork * road = nullptr;
  std::vector<Vehicle> vehicles;
  double time = 0.0;
  std::size_t frame = 0;

  Vehicle * find(int id);
  const Vehicle * find(int id) const;
};

/// Recomputes the world state of `v` from its road coordinates; `prev` (if
/// any) supplies finite-difference yaw rate and acceleration.
void refresh_state(const RoadNetwork & road, Vehicle & v, const geometry::AgentState * prev, double dt);

/// Advances every vehicle by `dt`: IDM longitudinal law (or the vehicle's
/// scripted mode), gap-acceptance lane changes, lateral lane-change
/// profiles, noise, and crash freezing of overlapping vehicles.
void step_traffic(World & world, double dt, Rng & rng);

/// Background vehicle with the highest risk toward the ego among those within
/// `radius` (and passing `eligible`, when given). Ties go to the lowest id.
/// Throws NoCandidate.
int select_hazard_trigger(
  const World & world, int ego_id, const RiskParams & risk, double radius = 60.0,
  const std::function<bool(const Vehicle &)> & eligible = {});

// ---------------------------------------------------------------------------
// episodes

struct AgentTrack
{
  int id = 0;
  geometry::Trajectory track;  ///< states carry the agent's extent and mass
  bool operator==(const AgentTrack &) const = default;
};

struct SceneRecord
{
  std::string scene_id;
  ConflictType conflict_type = ConflictType::kCutIn;
  double frequency = geometry::kDefaultFrequency;
  std::size_t hazard_frame = kHalfWindow;
  int target_agent_id = 0;
  std::vector<AgentTrack> agents;  ///< target first
  std::vector<LaneSegment> map;
  std::optional<geometry::CollisionInfo> collision;  ///< frame indexes the scene
  risk::RiskTimeline risk;  ///< per_agent follows `agents` without the target

  // provenance of the generated hazard
  int trigger_agent_id = -1;
  Maneuver maneuver = Maneuver::kBrakeOnly;
  double hazard_threshold = 0.0;

  const AgentTrack & target() const;
  bool operator==(const SceneRecord &) const = default;
};

/// Pins parts of an episode that are otherwise sampled.
struct EpisodeOverrides
{
  std::optional<double> ego_speed;
  /// bumper-to-bumper gap to the trigger when the hazard starts (rear-end)
  std::optional<double> trigger_gap;
  std::optional<Maneuver> maneuver;
  std::optional<double> ego_brake_decel;
  std::optional<double> trigger_final_speed;
  std::optional<double> trigger_decel;
  std::optional<double> reaction_delay;
  /// ego holds speed until it reacts; no background traffic
  bool isolated = false;
};

SceneRecord run_episode(
  const HazardConfig & config, const RiskParams & risk, const RoadNetwork & road,
  ConflictType conflict, std::uint64_t seed, const EpisodeOverrides & overrides = {});

/// Roads used per conflict type: cut-in on a straight 3-lane highway, merging
/// at an on-ramp, rear-end on a curved 2-lane road.
struct RoadLibrary
{
  RoadNetwork straight = make_straight_highway();
  RoadNetwork curved = make_curved_road();
  RoadNetwork merge = make_merge_ramp();

  const RoadNetwork & for_conflict(ConflictType type) const;
};

struct DiscardedEpisode
{
  std::size_t attempt = 0;
  std::uint64_t seed = 0;
  std::string reason;
};

struct GeneratedDataset
{
  std::vector<SceneRecord> scenes;
  std::vector<std::uint64_t> seeds;
  std::vector<DiscardedEpisode> discarded;
};

/// Episode attempts use derive_seed(master, attempt); the conflict type of an
/// attempt is drawn from conflict_mix with the attempt's own seed. Attempts
/// continue until `n_episodes` scenes are kept (at most 4 n attempts).
GeneratedDataset generate_dataset(
  const HazardConfig & config, const RiskParams & risk, const RoadLibrary & roads,
  std::uint64_t seed, std::size_t n_episodes, unsigned threads = 1);

/// Rounds to 9 significant decimal digits, the precision of the scene files.
double quantize(double value);

}  // namespace scrisk::sim

#endif  // SCRISK__SCENARIO_HPP_
