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

#include <gtest/gtest.h>

#include <cmath>

#include "scrisk/errors.hpp"
#include "scrisk/risk_field.hpp"

namespace g = scrisk::geometry;
namespace r = scrisk::risk;

namespace
{

g::AgentState car(double x, double y, double heading, double speed)
{
  g::AgentState s;
  s.x = x;
  s.y = y;
  s.heading = heading;
  s.speed = speed;
  return s;
}

}  // namespace

TEST(Drf, ReferenceValue)
{
  const r::DrfParams p;
  EXPECT_NEAR(r::look_ahead(10.0, p), 31.6228, 1e-4);
  const double s_max = std::pow(10.0, 1.5);
  const double a = (s_max - 10.0) * (s_max - 10.0) / ((s_max - 1.0) * (s_max - 1.0));
  EXPECT_NEAR(a, 0.49858, 1e-5);
  const double v = r::drf_probability(car(0, 0, 0, 10), {10, 1}, p);
  EXPECT_NEAR(v, 0.30240, 1e-5);
  EXPECT_NEAR(v, a * std::exp(-0.5), 1e-14);
}

TEST(Drf, Branches)
{
  const r::DrfParams p;
  const auto t = car(0, 0, 0, 10);
  EXPECT_EQ(r::drf_probability(t, {40, 0}, p), 0.0);   // beyond s_max
  EXPECT_EQ(r::drf_probability(t, {-1, 0}, p), 0.0);   // behind
  EXPECT_DOUBLE_EQ(r::drf_probability(t, {0.5, 0}, p), p.A);
  EXPECT_DOUBLE_EQ(r::drf_probability(t, {1.0, 0}, p), p.A);
  // slow vehicles keep the 5 m/s look-ahead floor
  EXPECT_DOUBLE_EQ(r::look_ahead(1.0, p), std::pow(5.0, 1.5));
}

TEST(Drf, SymmetricInLateralOffset)
{
  const r::DrfParams p;
  const auto t = car(0, 0, 0, 15);
  for (double s = 0.5; s < 60; s += 3.7) {
    EXPECT_EQ(r::drf_probability(t, {s, 1.3}, p), r::drf_probability(t, {s, -1.3}, p));
  }
}

TEST(Cost, StationaryObstacle)
{
  const r::CostParams c;
  EXPECT_NEAR(r::collision_cost(car(0, 0, 0, 0), car(20, 0, 0, 0), c), 0.1, 1e-15);
}

TEST(Cost, ReferenceEnergyIdentity)
{
  r::CostParams c;
  c.w_b = 0.0;
  c.w_r = 0.0;
  // obstacle moving away: no closing energy either way
  EXPECT_DOUBLE_EQ(r::collision_cost(car(0, 0, 0, 0), car(20, 0, 0, 30), c), 1.0);
}

TEST(Cost, ClosingEnergy)
{
  r::CostParams c;
  c.w_b = 0.0;
  c.w_a = 0.0;
  // target at 20 m/s approaching a stationary obstacle of equal mass
  const double e = 0.5 * 750.0 * 400.0 / (0.5 * 1500.0 * 900.0);
  EXPECT_NEAR(r::collision_cost(car(0, 0, 0, 20), car(30, 0, 0, 0), c), e, 1e-15);
  // receding: zero
  EXPECT_EQ(r::collision_cost(car(0, 0, 0, 0), car(30, 0, 0, 5), c), 0.0);
}

TEST(PairwiseRisk, Product)
{
  // tiny obstacle so that all field samples sit at (10, 1)
  auto obs = car(10, 1, 0, 0);
  obs.length = 1e-6;
  obs.width = 1e-6;
  const auto t = car(0, 0, 0, 10);
  r::CostParams c;
  const double closing = 10.0 * 10.0 / std::sqrt(101.0);
  const double e_r = 0.5 * 750.0 * closing * closing / (0.5 * 1500.0 * 900.0);
  c.w_r = (0.4333 - 0.1) / e_r;
  const auto out = r::pairwise_risk(t, obs, r::DrfParams{}, c);
  EXPECT_NEAR(out.probability, 0.30240, 1e-5);
  EXPECT_NEAR(out.cost, 0.4333, 1e-12);
  EXPECT_NEAR(out.risk, 130.90, 0.01);
  EXPECT_NEAR(out.risk, 999.0 * out.probability * out.cost, 1e-9);
  // rho_cap scales the product
  EXPECT_NEAR(r::pairwise_risk(t, obs, r::DrfParams{}, c, 2.0).risk, out.risk / 2.0, 1e-9);
}

TEST(PairwiseRisk, OutOfFieldAndOverlap)
{
  const auto t = car(0, 0, 0, 10);
  const auto far = r::pairwise_risk(t, car(80, 0, 0, 0), r::DrfParams{}, r::CostParams{});
  EXPECT_EQ(far.probability, 0.0);
  EXPECT_EQ(far.risk, 0.0);
  EXPECT_GT(far.cost, 0.0);
  const auto hit = r::pairwise_risk(t, car(2, 0, 0, 0), r::DrfParams{}, r::CostParams{});
  EXPECT_EQ(hit.risk, r::kCollisionRisk);
}

TEST(PairwiseRisk, SeparatedRiskStaysBelowCollision)
{
  r::CostParams c;
  c.w_b = 100.0;
  const auto out = r::pairwise_risk(car(0, 0, 0, 10), car(6, 0, 0, 0), r::DrfParams{}, c);
  EXPECT_EQ(out.risk, r::kMaxSeparatedRisk);
}

TEST(RiskHistory, Totals)
{
  g::Trajectory target;
  g::Trajectory a;
  g::Trajectory b;
  for (int k = 0; k < 10; ++k) {
    target.states.push_back(car(k, 0, 0, 10));
    a.states.push_back(car(k + 12, 0.5, 0, 0));
    b.states.push_back(car(k + 8, -1.0, 0, 0));
  }
  const auto none = r::scene_risk_history(target, {}, r::DrfParams{}, r::CostParams{});
  ASSERT_EQ(none.total.size(), 10u);
  for (const auto & x : none.total) {
    EXPECT_EQ(x.risk, 0.0);
  }
  const auto one = r::scene_risk_history(target, {a}, r::DrfParams{}, r::CostParams{});
  EXPECT_EQ(one.total, one.per_agent[0]);
  const auto two = r::scene_risk_history(target, {a, b}, r::DrfParams{}, r::CostParams{});
  for (int k = 0; k < 10; ++k) {
    const double sum = two.per_agent[0][k].risk + two.per_agent[1][k].risk;
    EXPECT_DOUBLE_EQ(two.total[k].risk, std::min(sum, 999.0));
  }
}

TEST(RiskHistory, SumIsCapped)
{
  // obstacles placed so that each one alone is high
  r::CostParams c;
  c.w_b = 10.0;
  g::Trajectory target;
  g::Trajectory a;
  g::Trajectory b;
  target.states = {car(0, 0, 0, 10)};
  a.states = {car(6, 0.0, 0, 0)};
  b.states = {car(7, 0.3, 0, 0)};
  const auto h = r::scene_risk_history(target, {a, b}, r::DrfParams{}, c);
  EXPECT_GT(h.per_agent[0][0].risk + h.per_agent[1][0].risk, 999.0);
  EXPECT_EQ(h.total[0].risk, 999.0);
}

TEST(RiskHistory, FrameRateMismatch)
{
  g::Trajectory target;
  target.states = {car(0, 0, 0, 10)};
  g::Trajectory other = target;
  other.frequency = 10.0;
  EXPECT_THROW(r::scene_risk_history(target, {other}, r::DrfParams{}, r::CostParams{}), scrisk::FrameRateMismatch);
}
