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

#ifndef SCRISK__GEOMETRY_HPP_
#define SCRISK__GEOMETRY_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace scrisk::geometry
{

inline constexpr double kDefaultFrequency = 20.0;
/// Below this speed (m/s) the arc frame degenerates to a straight line.
inline constexpr double kStraightSpeedEps = 0.1;
/// Below this yaw rate (rad/s) the arc frame degenerates to a straight line.
inline constexpr double kStraightYawRateEps = 1e-4;
inline constexpr double kDefaultMaxCurvature = 1.0;
/// Frames used by the constant-acceleration least-squares fit (0.5 s).
inline constexpr std::size_t kAccelFitWindow = 10;

struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2 & o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2 & o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  bool operator==(const Vec2 &) const = default;
  double dot(const Vec2 & o) const { return x * o.x + y * o.y; }
  double cross(const Vec2 & o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

/// Planar vehicle state. Heading is counter-clockwise from +x.
struct AgentState
{
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double yaw_rate = 0.0;
  double accel = 0.0;
  double length = 4.5;
  double width = 1.8;
  double mass = 1500.0;

  Vec2 position() const { return {x, y}; }
  Vec2 velocity() const { return {speed * std::cos(heading), speed * std::sin(heading)}; }
  bool operator==(const AgentState &) const = default;
};

/// Throws InvalidState unless speed >= 0, extents and mass > 0, everything finite.
void validate(const AgentState & state);

/// Uniformly sampled track; state k is at start_time + k / frequency.
struct Trajectory
{
  double start_time = 0.0;
  double frequency = kDefaultFrequency;
  std::vector<AgentState> states;

  double dt() const { return 1.0 / frequency; }
  double time_at(std::size_t k) const { return start_time + static_cast<double>(k) / frequency; }
  std::size_t size() const { return states.size(); }
  bool operator==(const Trajectory &) const = default;
};

/// Constant-turn path of a vehicle: circle of signed curvature through
/// `origin` with tangent `heading`. Zero curvature is a straight line.
struct ArcFrame
{
  Vec2 origin;
  double heading = 0.0;
  double curvature = 0.0;
};

/// Longitudinal arc length `s` and left-positive lateral offset `t`.
struct ArcCoord
{
  double s = 0.0;
  double t = 0.0;
};

struct CollisionInfo
{
  std::size_t frame = 0;  ///< index into the first trajectory
  double time = 0.0;
  std::pair<int, int> agent_pair{0, 0};
  double relative_speed = 0.0;
  bool operator==(const CollisionInfo &) const = default;
};

ArcFrame arc_frame_from_state(const AgentState & state, double max_curvature = kDefaultMaxCurvature);

/// Point at arc length `s` and lateral offset `t` of the frame (inverse of project_to_arc).
Vec2 embed_in_arc(const ArcFrame & frame, const ArcCoord & coord);

/// Projects a world point onto the frame's arc. Throws CenterSingularity for
/// the center of a curved frame.
ArcCoord project_to_arc(const ArcFrame & frame, const Vec2 & point);

Trajectory predict_constant_velocity(const Trajectory & history, std::size_t horizon_frames);
Trajectory predict_constant_acceleration(const Trajectory & history, std::size_t horizon_frames);

/// Corners of the oriented footprint, counter-clockwise starting front-left.
std::array<Vec2, 4> footprint_corners(const AgentState & state);

/// Separating-axis test of the two oriented footprints; touching counts as overlap.
bool obb_overlap(const AgentState & a, const AgentState & b);

/// Earliest common frame at which the footprints overlap. Frames are aligned
/// by timestamps; the reported frame indexes `a`.
std::optional<CollisionInfo> first_collision(
  const Trajectory & a, const Trajectory & b, int id_a = 0, int id_b = 1);

double normalize_angle(double angle);

}  // namespace scrisk::geometry

#endif  // SCRISK__GEOMETRY_HPP_
