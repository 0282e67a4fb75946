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

#ifndef SCRISK__METRICS_HPP_
#define SCRISK__METRICS_HPP_

#include "scrisk/model.hpp"
#include "scrisk/scenario.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace scrisk::metrics
{

using erq::PredictedMode;
using erq::PredictionSet;

enum class EvalGroup { kNonCollision = 0, kCollisionIn1s = 1, kCollisionIn2s = 2, kCollisionIn5s = 3 };

inline constexpr std::array<EvalGroup, 4> kEvalGroups{
  EvalGroup::kNonCollision, EvalGroup::kCollisionIn1s, EvalGroup::kCollisionIn2s, EvalGroup::kCollisionIn5s};

std::string to_string(EvalGroup group);

struct MetricsConfig
{
  double miss_threshold = 2.0;                  ///< m, on final displacement
  std::array<double, 3> group_bounds{1.0, 2.0, 5.0};  ///< s, closed upper bounds
  double velocity_threshold = 2.5;              ///< m/s
  double time_threshold = 0.25;                 ///< s
  double risk_threshold = 0.15;                 ///< normalized
  /// stop displacement errors at the ground-truth contact frame
  bool truncate_at_collision = true;
  bool operator==(const MetricsConfig &) const = default;
};

void validate(const MetricsConfig & config);
nlohmann::json to_json(const MetricsConfig & config);
MetricsConfig metrics_config_from_json(const nlohmann::json & j);

// ---------------------------------------------------------------------------
// classical displacement metrics

struct ClassicalResult
{
  double min_ade = 0.0;
  double min_fde = 0.0;
  bool miss = false;
  double brier_min_fde = 0.0;
  std::size_t best_fde_mode = 0;
};

/// Errors over the Gaussian means against `gt`, whose states line up with the
/// predicted points. Only the first `frames` points are compared (all if unset).
ClassicalResult classical_metrics(
  const PredictionSet & pred, const geometry::Trajectory & gt, double miss_threshold = 2.0,
  std::optional<std::size_t> frames = std::nullopt);

EvalGroup group_by_collision_time(const sim::SceneRecord & scene, const MetricsConfig & config = {});

/// Ground-truth future of one agent over the prediction horizon, starting one
/// frame after the origin.
geometry::Trajectory future_track(const sim::SceneRecord & scene, std::size_t agent, std::size_t frames);

// ---------------------------------------------------------------------------
// safety metrics

/// Target trajectory of one predicted mode: means, heading from consecutive
/// points, speed from the velocity head, target footprint.
geometry::Trajectory mode_track(const PredictionSet & pred, const PredictedMode & mode, const sim::SceneRecord & scene);

/// Earliest contact of the mode with any other agent's ground-truth future.
std::optional<geometry::CollisionInfo> mode_collision(
  const PredictionSet & pred, const PredictedMode & mode, const sim::SceneRecord & scene);

struct SafetyRecord
{
  bool collision_scene = false;
  // collision scenes
  bool collision_miss = false;
  std::optional<double> velocity_error;  ///< unset when no mode collides
  std::optional<double> time_error;
  bool velocity_miss = false;
  bool time_miss = false;
  // non-collision scenes
  std::optional<double> risk_error;
  bool risk_miss = false;
};

struct SafetyMetrics
{
  SafetyRecord all_modes;  ///< k = number of modes
  SafetyRecord top_mode;   ///< k = 1
};

/// Index of the most probable mode; ties go to the lower index.
std::size_t top_mode_index(const PredictionSet & pred);

SafetyMetrics safety_metrics(const PredictionSet & pred, const sim::SceneRecord & scene, const MetricsConfig & config = {});

/// Share of modes that hit another agent's ground-truth future.
double collision_probability_estimate(const PredictionSet & pred, const sim::SceneRecord & scene);

// ---------------------------------------------------------------------------
// baselines

/// Single-mode constant-velocity or constant-acceleration extrapolation of the
/// target, with its risk timeline against the other agents' ground truth.
PredictionSet constant_velocity_baseline(
  const sim::SceneRecord & scene, std::size_t t_fut, const sim::RiskParams & risk);
PredictionSet constant_acceleration_baseline(
  const sim::SceneRecord & scene, std::size_t t_fut, const sim::RiskParams & risk);

// ---------------------------------------------------------------------------
// aggregation

struct SceneEvaluation
{
  std::string scene_id;
  EvalGroup group = EvalGroup::kNonCollision;
  std::size_t k = 0;
  ClassicalResult classical_k;
  ClassicalResult classical_1;
  SafetyMetrics safety;
  double collision_fraction = 0.0;
};

SceneEvaluation evaluate_scene(const PredictionSet & pred, const sim::SceneRecord & scene, const MetricsConfig & config = {});

struct MetricCell
{
  std::string method;
  std::string group;   ///< an EvalGroup name, "collision", or "all"
  std::string metric;
  std::size_t k = 0;
  double value = 0.0;  ///< NaN when count is 0
  std::size_t count = 0;
  bool operator==(const MetricCell & o) const;
};

inline constexpr const char * kReportSchema = "scrisk-report/1";

struct MetricsReport
{
  std::vector<MetricCell> cells;
  nlohmann::json meta = nlohmann::json::object();

  /// nullptr when absent
  const MetricCell * find(const std::string & method, const std::string & group, const std::string & metric, std::size_t k) const;
  bool operator==(const MetricsReport & o) const { return cells == o.cells && meta == o.meta; }
};

/// Appends the cells of one method; scenes are reduced in the given order.
void aggregate(MetricsReport & report, const std::string & method, const std::vector<SceneEvaluation> & scenes);

nlohmann::json to_json(const MetricsReport & report);
MetricsReport report_from_json(const nlohmann::json & j);
std::string to_csv(const MetricsReport & report);

/// Crash rate of the modes guided by each risk level: per level, the mean over
/// scenes and endpoint intentions of "mode collides".
std::vector<double> risk_level_crash_rates(
  const std::vector<PredictionSet> & all_modes, const std::vector<sim::SceneRecord> & scenes, std::size_t n_risk);

}  // namespace scrisk::metrics

#endif  // SCRISK__METRICS_HPP_
