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

#ifndef SCRISK__RISK_FIELD_HPP_
#define SCRISK__RISK_FIELD_HPP_

#include "scrisk/geometry.hpp"

#include <vector>

namespace scrisk::risk
{

/// Risk value reserved for geometric contact.
inline constexpr double kCollisionRisk = 999.0;
/// Upper bound of the risk between two separated vehicles, so that 999 is
/// reached only on contact.
inline constexpr double kMaxSeparatedRisk = 998.999;

/// Coefficients of the driver risk field.
///
/// Height a(s) = A (s_max - max(s, s_min))^2 / (s_max - s_min)^2 and width
/// sigma(s) = B max(s, s_min) + C along the predicted arc, with the look-ahead
/// s_max = D max(v, 5)^E.
struct DrfParams
{
  double A = 1.0;
  double B = 0.05;
  double C = 0.5;
  double D = 1.0;
  double E = 1.5;
  double s_min = 1.0;
  double max_curvature = geometry::kDefaultMaxCurvature;
};

/// Weights of the impact-energy collision cost. Energies are normalized by
/// the kinetic energy of a reference vehicle.
struct CostParams
{
  double basic_cost_norm = 0.1;
  double w_b = 1.0;
  double w_a = 1.0;
  double w_r = 1.0;
  double ref_mass = 1500.0;
  double ref_speed = 30.0;
};

void validate(const DrfParams & p);
void validate(const CostParams & p);

struct RiskTriple
{
  double probability = 0.0;
  double cost = 0.0;
  double risk = 0.0;
  bool operator==(const RiskTriple &) const = default;
};

struct RiskTimeline
{
  /// per_agent[i][k]: risk of other agent i toward the target at frame k
  std::vector<std::vector<RiskTriple>> per_agent;
  /// component-wise sum over agents; risk capped at kCollisionRisk
  std::vector<RiskTriple> total;
  bool operator==(const RiskTimeline &) const = default;
};

/// s_max of the field for a vehicle moving at `speed`.
double look_ahead(double speed, const DrfParams & params);

/// Field value at `point` seen from `target`. Zero behind the vehicle and beyond s_max.
double drf_probability(
  const geometry::AgentState & target, const geometry::Vec2 & point, const DrfParams & params);

double collision_cost(
  const geometry::AgentState & target, const geometry::AgentState & obstacle,
  const CostParams & params);

RiskTriple pairwise_risk(
  const geometry::AgentState & target, const geometry::AgentState & obstacle,
  const DrfParams & drf, const CostParams & cost, double rho_cap = 1.0);

/// Per-frame pairwise risk of every other track toward the target plus the total.
RiskTimeline scene_risk_history(
  const geometry::Trajectory & target_track,
  const std::vector<geometry::Trajectory> & other_tracks, const DrfParams & drf,
  const CostParams & cost, double rho_cap = 1.0);

}  // namespace scrisk::risk

#endif  // SCRISK__RISK_FIELD_HPP_
