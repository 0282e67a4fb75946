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

#ifndef SCRISK__ROAD_HPP_
#define SCRISK__ROAD_HPP_

#include "scrisk/geometry.hpp"

#include <string>
#include <utility>
#include <vector>

namespace scrisk::sim
{

/// Points per lane-segment centerline.
inline constexpr std::size_t kPolylinePoints = 20;
inline constexpr double kPolylineSpacing = 5.0;

enum class RoadKind { kStraightHighway, kCurvedRoad, kMergeRamp };

std::string to_string(RoadKind kind);

struct LaneSegment
{
  int id = 0;
  int lane_index = 0;  ///< -1 is the on-ramp (or right shoulder)
  std::vector<geometry::Vec2> centerline;
  bool operator==(const LaneSegment &) const = default;
};

/// Road with a reference line and lanes at fixed lateral offsets from it.
///
/// Vehicles are simulated in road coordinates (s along the reference, d to the
/// left). Lane i (0 = rightmost) is centered at d = (i - (n - 1) / 2) * width.
/// On a merge road, lane -1 is the on-ramp, which joins the main road at
/// `ramp_join` and ends at `ramp_end`.
struct RoadNetwork
{
  RoadKind kind = RoadKind::kStraightHighway;
  int num_lanes = 3;
  double lane_width = 3.5;
  double length = 1200.0;
  double radius = 0.0;  ///< left-turning reference radius; 0 is straight
  double ramp_join = 0.0;
  double ramp_end = 0.0;
  std::vector<LaneSegment> lanes;
  std::vector<std::pair<int, int>> links;  ///< (from segment, to segment)

  double curvature() const { return radius > 0.0 ? 1.0 / radius : 0.0; }
  bool has_ramp() const { return kind == RoadKind::kMergeRamp; }

  /// Lateral offset of the center of `lane` at arc length `s`.
  double lane_center(int lane, double s) const;
  /// World position and reference heading at road coordinates (s, d).
  geometry::Vec2 to_world(double s, double d) const;
  double heading_at(double s) const;
  /// Lane whose center is nearest to d (main lanes, plus the ramp while it exists).
  int lane_of(double s, double d) const;
  bool lane_exists(int lane, double s) const;
};

RoadNetwork make_straight_highway(int lanes = 3, double lane_width = 3.5, double length = 1200.0);
RoadNetwork make_curved_road(int lanes = 2, double lane_width = 3.5, double radius = 200.0, double length = 900.0);
RoadNetwork make_merge_ramp(
  int lanes = 2, double lane_width = 3.5, double ramp_join = 300.0, double ramp_end = 500.0,
  double length = 1200.0);

/// Segments with at least one point within `radius` of `center`; links are kept
/// when both ends survive.
RoadNetwork map_excerpt(const RoadNetwork & road, const geometry::Vec2 & center, double radius);

}  // namespace scrisk::sim

#endif  // SCRISK__ROAD_HPP_
