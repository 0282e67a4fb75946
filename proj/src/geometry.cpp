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

#include "scrisk/geometry.hpp"

#include "scrisk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace scrisk::geometry
{

namespace
{

bool finite(double v) { return std::isfinite(v); }

void require_frames(const Trajectory & history, std::size_t n)
{
  if (history.states.size() < n) {
    throw InsufficientHistory(
      "history has " + std::to_string(history.states.size()) + " frames, need " +
      std::to_string(n));
  }
}

AgentState extrapolated_state(const AgentState & last, Vec2 position, Vec2 velocity, double accel)
{
  AgentState s = last;
  s.x = position.x;
  s.y = position.y;
  s.speed = velocity.norm();
  if (s.speed > kStraightSpeedEps) {
    s.heading = std::atan2(velocity.y, velocity.x);
  }
  s.yaw_rate = 0.0;
  s.accel = accel;
  return s;
}

}  // namespace

double normalize_angle(double angle)
{
  angle = std::fmod(angle + std::numbers::pi, 2.0 * std::numbers::pi);
  if (angle < 0.0) {
    angle += 2.0 * std::numbers::pi;
  }
  return angle - std::numbers::pi;
}

void validate(const AgentState & s)
{
  if (!finite(s.x) || !finite(s.y) || !finite(s.heading) || !finite(s.speed) ||
      !finite(s.yaw_rate) || !finite(s.accel) || !finite(s.length) || !finite(s.width) ||
      !finite(s.mass)) {
    throw InvalidState("agent state has a non-finite field");
  }
  if (s.speed < 0.0) {
    throw InvalidState("agent speed must be non-negative");
  }
  if (s.length <= 0.0 || s.width <= 0.0 || s.mass <= 0.0) {
    throw InvalidState("agent extents and mass must be positive");
  }
}

ArcFrame arc_frame_from_state(const AgentState & state, double max_curvature)
{
  validate(state);
  ArcFrame frame{state.position(), state.heading, 0.0};
  if (state.speed < kStraightSpeedEps || std::abs(state.yaw_rate) < kStraightYawRateEps) {
    return frame;
  }
  frame.curvature = std::clamp(state.yaw_rate / state.speed, -max_curvature, max_curvature);
  return frame;
}

Vec2 embed_in_arc(const ArcFrame & frame, const ArcCoord & coord)
{
  const double c = std::cos(frame.heading);
  const double s = std::sin(frame.heading);
  if (frame.curvature == 0.0) {
    return {
      frame.origin.x + coord.s * c - coord.t * s, frame.origin.y + coord.s * s + coord.t * c};
  }
  const double k = frame.curvature;
  const double phi = k * coord.s;
  // arc point in the vehicle frame, then the left normal at that point
  const double lx = std::sin(phi) / k - coord.t * std::sin(phi);
  const double half = std::sin(0.5 * phi);
  const double ly = 2.0 * half * half / k + coord.t * std::cos(phi);
  return {frame.origin.x + lx * c - ly * s, frame.origin.y + lx * s + ly * c};
}

ArcCoord project_to_arc(const ArcFrame & frame, const Vec2 & point)
{
  if (!finite(point.x) || !finite(point.y)) {
    throw InvalidState("projected point is not finite");
  }
  const Vec2 d = point - frame.origin;
  const double c = std::cos(frame.heading);
  const double s = std::sin(frame.heading);
  const double lx = c * d.x + s * d.y;
  const double ly = -s * d.x + c * d.y;
  if (frame.curvature == 0.0) {
    return {lx, ly};
  }
  // Written without 1/k so that gentle curves keep full precision:
  // phi = atan2(k lx, 1 - k ly) and t = (2 ly - k |l|^2) / (1 + |k| rho),
  // rho being the distance to the center (0, 1/k).
  const double k = frame.curvature;
  const double u = k * lx;
  const double w = 1.0 - k * ly;
  if (std::hypot(u, w) <= 1e-12) {
    throw CenterSingularity("point coincides with the center of the turning circle");
  }
  const double phi = std::atan2(u, w);
  const double rho_k = std::hypot(u, w);  // |k| rho
  return {phi / k, (2.0 * ly - k * (lx * lx + ly * ly)) / (1.0 + rho_k)};
}

Trajectory predict_constant_velocity(const Trajectory & history, std::size_t horizon_frames)
{
  require_frames(history, 2);
  const auto & last = history.states.back();
  const auto & prev = history.states[history.states.size() - 2];
  const double dt = history.dt();
  const Vec2 v = (last.position() - prev.position()) * history.frequency;

  Trajectory out;
  out.frequency = history.frequency;
  out.start_time = history.time_at(history.states.size());
  out.states.reserve(horizon_frames);
  for (std::size_t k = 1; k <= horizon_frames; ++k) {
    const double tau = static_cast<double>(k) * dt;
    AgentState st = extrapolated_state(last, last.position() + v * tau, v, 0.0);
    st.heading = last.heading;
    out.states.push_back(st);
  }
  return out;
}

Trajectory predict_constant_acceleration(const Trajectory & history, std::size_t horizon_frames)
{
  const std::size_t window = kAccelFitWindow;
  require_frames(history, std::max<std::size_t>(3, window));
  const std::size_t n = history.states.size();
  const double dt = history.dt();

  // least squares of p(tau) = p0 + v tau + a tau^2 / 2 over the last `window`
  // frames, tau measured from the last frame (so tau <= 0)
  double m[3][3] = {};
  double bx[3] = {};
  double by[3] = {};
  for (std::size_t i = 0; i < window; ++i) {
    const auto & st = history.states[n - window + i];
    const double tau = -static_cast<double>(window - 1 - i) * dt;
    const double basis[3] = {1.0, tau, 0.5 * tau * tau};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        m[r][c] += basis[r] * basis[c];
      }
      bx[r] += basis[r] * st.x;
      by[r] += basis[r] * st.y;
    }
  }
  // 3x3 solve by Cramer's rule; the normal matrix is well conditioned for 10 samples
  const auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double det = det3(m);
  const auto solve = [&](const double rhs[3]) {
    std::array<double, 3> x{};
    for (int col = 0; col < 3; ++col) {
      double mc[3][3];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          mc[r][c] = (c == col) ? rhs[r] : m[r][c];
        }
      }
      x[col] = det3(mc) / det;
    }
    return x;
  };
  const auto cx = solve(bx);
  const auto cy = solve(by);
  const Vec2 v{cx[1], cy[1]};
  const Vec2 a{cx[2], cy[2]};

  const auto & last = history.states.back();
  Trajectory out;
  out.frequency = history.frequency;
  out.start_time = history.time_at(n);
  out.states.reserve(horizon_frames);
  for (std::size_t k = 1; k <= horizon_frames; ++k) {
    const double tau = static_cast<double>(k) * dt;
    const Vec2 pos = last.position() + v * tau + a * (0.5 * tau * tau);
    const Vec2 vel = v + a * tau;
    const double along = vel.norm() > 0.0 ? a.dot(vel) / vel.norm() : 0.0;
    AgentState st = extrapolated_state(last, pos, vel, along);
    if (st.speed <= kStraightSpeedEps) {
      st.heading = out.states.empty() ? last.heading : out.states.back().heading;
    }
    out.states.push_back(st);
  }
  return out;
}

std::array<Vec2, 4> footprint_corners(const AgentState & st)
{
  const double c = std::cos(st.heading);
  const double s = std::sin(st.heading);
  const Vec2 f{c * st.length * 0.5, s * st.length * 0.5};
  const Vec2 l{-s * st.width * 0.5, c * st.width * 0.5};
  const Vec2 p = st.position();
  return {p + f + l, p - f + l, p - f - l, p + f - l};
}

bool obb_overlap(const AgentState & a, const AgentState & b)
{
  const Vec2 d = b.position() - a.position();
  const Vec2 axes[4] = {
    {std::cos(a.heading), std::sin(a.heading)},
    {-std::sin(a.heading), std::cos(a.heading)},
    {std::cos(b.heading), std::sin(b.heading)},
    {-std::sin(b.heading), std::cos(b.heading)},
  };
  const auto radius = [](const AgentState & st, const Vec2 & fwd, const Vec2 & left, const Vec2 & axis) {
    return 0.5 * st.length * std::abs(fwd.dot(axis)) + 0.5 * st.width * std::abs(left.dot(axis));
  };
  for (const auto & axis : axes) {
    const double ra = radius(a, axes[0], axes[1], axis);
    const double rb = radius(b, axes[2], axes[3], axis);
    if (std::abs(d.dot(axis)) > ra + rb) {
      return false;
    }
  }
  return true;
}

std::optional<CollisionInfo> first_collision(
  const Trajectory & a, const Trajectory & b, int id_a, int id_b)
{
  if (a.frequency != b.frequency) {
    throw FrameRateMismatch("trajectories sampled at different frequencies");
  }
  // frame of b aligned with frame 0 of a
  const long offset = std::lround((a.start_time - b.start_time) * a.frequency);
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    const long j = static_cast<long>(i) + offset;
    if (j < 0) {
      continue;
    }
    if (j >= static_cast<long>(b.states.size())) {
      break;
    }
    const auto & sa = a.states[i];
    const auto & sb = b.states[static_cast<std::size_t>(j)];
    if (obb_overlap(sa, sb)) {
      return CollisionInfo{i, a.time_at(i), {id_a, id_b}, (sa.velocity() - sb.velocity()).norm()};
    }
  }
  return std::nullopt;
}

}  // namespace scrisk::geometry
