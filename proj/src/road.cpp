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

#include "scrisk/road.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace scrisk::sim
{

namespace
{

// lateral depth of the ramp entry below the acceleration lane
constexpr double kRampEntryDepth = 8.0;

void build_segments(RoadNetwork & road, int lane, double s_begin, double s_end, int & next_id)
{
  const double seg_len = kPolylineSpacing * static_cast<double>(kPolylinePoints - 1);
  int prev = -1;
  for (double s0 = s_begin; s0 + seg_len <= s_end + 1e-9; s0 += seg_len) {
    LaneSegment seg;
    seg.id = next_id++;
    seg.lane_index = lane;
    for (std::size_t j = 0; j < kPolylinePoints; ++j) {
      const double s = s0 + kPolylineSpacing * static_cast<double>(j);
      seg.centerline.push_back(road.to_world(s, road.lane_center(lane, s)));
    }
    if (prev >= 0) {
      road.links.emplace_back(prev, seg.id);
    }
    prev = seg.id;
    road.lanes.push_back(std::move(seg));
  }
}

void build_all(RoadNetwork & road)
{
  int next_id = 0;
  for (int lane = 0; lane < road.num_lanes; ++lane) {
    build_segments(road, lane, 0.0, road.length, next_id);
  }
  if (road.has_ramp()) {
    const int first_ramp = next_id;
    build_segments(road, -1, 0.0, road.ramp_end, next_id);
    // merge link: last ramp segment into the rightmost main-lane segment covering ramp_end
    if (next_id > first_ramp) {
      const auto & last = road.lanes.back();
      const auto end = last.centerline.back();
      int best = -1;
      double best_d = 1e18;
      for (const auto & seg : road.lanes) {
        if (seg.lane_index != 0) {
          continue;
        }
        for (const auto & p : seg.centerline) {
          const double d = (p - end).norm();
          if (d < best_d) {
            best_d = d;
            best = seg.id;
          }
        }
      }
      if (best >= 0) {
        road.links.emplace_back(last.id, best);
      }
    }
  }
}

}  // namespace

std::string to_string(RoadKind kind)
{
  switch (kind) {
    case RoadKind::kStraightHighway:
      return "straight_highway";
    case RoadKind::kCurvedRoad:
      return "curved_road";
    case RoadKind::kMergeRamp:
      return "merge_ramp";
  }
  return "unknown";
}

double RoadNetwork::lane_center(int lane, double s) const
{
  double d = (static_cast<double>(lane) - 0.5 * static_cast<double>(num_lanes - 1)) * lane_width;
  if (has_ramp() && lane == -1 && s < ramp_join) {
    const double u = 1.0 - std::max(0.0, s) / ramp_join;
    d -= kRampEntryDepth * u * u;
  }
  return d;
}

geometry::Vec2 RoadNetwork::to_world(double s, double d) const
{
  if (radius <= 0.0) {
    return {s, d};
  }
  const double phi = s / radius;
  return {(radius - d) * std::sin(phi), radius - (radius - d) * std::cos(phi)};
}

double RoadNetwork::heading_at(double s) const
{
  return radius > 0.0 ? s / radius : 0.0;
}

bool RoadNetwork::lane_exists(int lane, double s) const
{
  if (lane >= 0 && lane < num_lanes) {
    return true;
  }
  return has_ramp() && lane == -1 && s <= ramp_end;
}

int RoadNetwork::lane_of(double s, double d) const
{
  int best = 0;
  double best_err = 1e18;
  for (int lane = has_ramp() ? -1 : 0; lane < num_lanes; ++lane) {
    if (!lane_exists(lane, s)) {
      continue;
    }
    const double err = std::abs(d - lane_center(lane, s));
    if (err < best_err) {
      best_err = err;
      best = lane;
    }
  }
  return best;
}

RoadNetwork make_straight_highway(int lanes, double lane_width, double length)
{
  RoadNetwork road;
  road.kind = RoadKind::kStraightHighway;
  road.num_lanes = lanes;
  road.lane_width = lane_width;
  road.length = length;
  build_all(road);
  return road;
}

RoadNetwork make_curved_road(int lanes, double lane_width, double radius, double length)
{
  RoadNetwork road;
  road.kind = RoadKind::kCurvedRoad;
  road.num_lanes = lanes;
  road.lane_width = lane_width;
  road.radius = radius;
  road.length = length;
  build_all(road);
  return road;
}

RoadNetwork make_merge_ramp(int lanes, double lane_width, double ramp_join, double ramp_end, double length)
{
  RoadNetwork road;
  road.kind = RoadKind::kMergeRamp;
  road.num_lanes = lanes;
  road.lane_width = lane_width;
  road.ramp_join = ramp_join;
  road.ramp_end = ramp_end;
  road.length = length;
  build_all(road);
  return road;
}

RoadNetwork map_excerpt(const RoadNetwork & road, const geometry::Vec2 & center, double radius)
{
  RoadNetwork out = road;
  out.lanes.clear();
  out.links.clear();
  std::set<int> kept;
  for (const auto & seg : road.lanes) {
    const bool near = std::any_of(seg.centerline.begin(), seg.centerline.end(), [&](const auto & p) {
      return (p - center).norm() <= radius;
    });
    if (near) {
      kept.insert(seg.id);
      out.lanes.push_back(seg);
    }
  }
  for (const auto & link : road.links) {
    if (kept.count(link.first) && kept.count(link.second)) {
      out.links.push_back(link);
    }
  }
  return out;
}

}  // namespace scrisk::sim
