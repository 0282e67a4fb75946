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

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "scrisk/errors.hpp"
#include "scrisk/model.hpp"
#include "scrisk/scenario.hpp"

namespace erq = scrisk::erq;
namespace sim = scrisk::sim;
using scrisk::geometry::Vec2;

namespace
{

const std::vector<sim::SceneRecord> & scenes()
{
  static const auto ds = sim::generate_dataset(sim::HazardConfig{}, sim::RiskParams{}, sim::RoadLibrary{}, 21, 8);
  return ds.scenes;
}

erq::ModelConfig tiny()
{
  erq::ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_enc = 1;
  c.n_dec = 2;
  c.n_end = 4;
  c.n_risk = 3;
  c.t_fut = 40;
  c.dropout = 0.0;
  return c;
}

erq::Model tiny_model(std::uint64_t seed = 1)
{
  erq::Model m;
  m.config = tiny();
  m.intentions.endpoints = {{10, 0}, {20, 0}, {30, 2}, {40, -2}};
  m.intentions.risks = erq::default_risk_intentions(3);
  m.initialize(seed);
  return m;
}

}  // namespace

TEST(Sample, EncodedShapes)
{
  erq::ModelConfig c;
  c.max_agents = 4;
  c.max_map_tokens = 8;
  const auto it = std::find_if(scenes().begin(), scenes().end(), [](const auto & sc) {
    return sc.agents.size() >= 5 && sc.map.size() >= 8;
  });
  ASSERT_NE(it, scenes().end());
  const auto & s = *it;
  const auto sample = erq::prepare_sample(s, c);
  erq::Model m;
  m.config = c;
  m.intentions.endpoints.assign(16, Vec2{});
  for (std::size_t i = 0; i < 16; ++i) m.intentions.endpoints[i] = {double(i), 0.0};
  m.intentions.risks = {300, 600, 999};
  m.initialize(2);
  erq::Graph g;
  const auto enc = erq::encode_scene(g, m.store, c, sample);
  EXPECT_EQ(enc.agents.value().shape(), (std::vector<std::size_t>{5, 64}));
  EXPECT_EQ(enc.map.value().shape(), (std::vector<std::size_t>{8, 64}));
  EXPECT_EQ(enc.risk.value().shape(), (std::vector<std::size_t>{4, 64}));
  const auto intents = erq::embed_intentions(g, m.store, c, m.intentions);
  EXPECT_EQ(intents.endpoints.value().shape(), (std::vector<std::size_t>{16, 64}));
  EXPECT_EQ(intents.risks.value().shape(), (std::vector<std::size_t>{3, 64}));
  const auto out = erq::decode_layer(g, m.store, c, 0, erq::initial_queries(g, c), intents, enc);
  EXPECT_EQ(out.modes.rows(), 48u);
  EXPECT_EQ(out.logits.rows(), 48u);
}

TEST(Sample, Errors)
{
  auto s = scenes().front();
  erq::ModelConfig c = tiny();
  s.risk.per_agent.clear();
  EXPECT_THROW(erq::prepare_sample(s, c), scrisk::MissingRisk);
  s = scenes().front();
  s.hazard_frame = 5;
  EXPECT_THROW(erq::prepare_sample(s, c), scrisk::InsufficientHistory);
}

TEST(Sample, LocalFrameRoundTrip)
{
  const auto sample = erq::prepare_sample(scenes()[1], tiny());
  const Vec2 w{123.4, -56.7};
  const Vec2 back = erq::to_world(sample, erq::to_local(sample, w));
  EXPECT_NEAR(back.x, w.x, 1e-9);
  EXPECT_NEAR(back.y, w.y, 1e-9);
  EXPECT_NEAR(erq::to_local(sample, sample.origin).x, 0.0, 1e-12);
}

TEST(Intentions, Validation)
{
  erq::IntentionSet i{{{0, 0}}, {300, 600, 999}};
  EXPECT_NO_THROW(erq::validate(i));
  i.risks = {600, 300, 999};
  EXPECT_THROW(erq::validate(i), scrisk::ConfigError);
  i.risks = {300, 600};
  EXPECT_THROW(erq::validate(i), scrisk::ConfigError);
  EXPECT_EQ(erq::default_risk_intentions(3), (std::vector<double>{300, 600, 999}));
}

TEST(Intentions, CountMismatch)
{
  auto m = tiny_model();
  erq::IntentionSet bad = m.intentions;
  bad.endpoints.pop_back();
  erq::Graph g;
  EXPECT_THROW(erq::embed_intentions(g, m.store, m.config, bad), scrisk::ConfigMismatch);
}

TEST(Assignment, ExactMatch)
{
  erq::IntentionSet i;
  for (int k = 0; k < 16; ++k) i.endpoints.push_back({5.0 * k, k % 3 - 1.0});
  i.risks = {300, 600, 999};
  const auto [a, b] = erq::hard_assign(i, i.endpoints[3], 999.0);
  EXPECT_EQ(a, 3u);
  EXPECT_EQ(b, 2u);
  // ties go to the lower index
  erq::IntentionSet t{{{0, 0}, {2, 0}}, {300, 600, 999}};
  EXPECT_EQ(erq::hard_assign(t, {1, 0}, 450).first, 0u);
  EXPECT_EQ(erq::hard_assign(t, {1, 0}, 450).second, 0u);
}

TEST(Assignment, LossUsesFlatIndex)
{
  auto m = tiny_model();
  const auto sample = erq::prepare_sample(scenes()[0], m.config);
  ASSERT_TRUE(sample.has_future);
  erq::Graph g;
  const auto pass = erq::forward(g, m, sample, false);
  const auto loss = erq::hard_assign_and_losses(g, m.config, pass.layers, pass.dense, sample, m.intentions);
  EXPECT_EQ(loss.breakdown.mode, loss.breakdown.i_star * 3 + loss.breakdown.j_star);
  EXPECT_TRUE(std::isfinite(loss.breakdown.total));
  EXPECT_NEAR(loss.breakdown.traj, loss.breakdown.reg + loss.breakdown.cls, 1e-9);
}

TEST(Selection, NmsAndBackfill)
{
  std::vector<erq::PredictedMode> modes(5);
  const double probs[5] = {0.1, 0.3, 0.25, 0.2, 0.15};
  for (int i = 0; i < 5; ++i) {
    modes[i].probability = probs[i];
    modes[i].trajectory = {{10.0 * i, 0, 1, 1, 0}};
  }
  EXPECT_EQ(erq::select_top_k_modes(modes, 3), (std::vector<std::size_t>{1, 2, 3}));
  for (auto & m : modes) m.trajectory = {{1, 1, 1, 1, 0}};
  // one survivor, the rest backfilled by probability
  EXPECT_EQ(erq::select_top_k_modes(modes, 3), (std::vector<std::size_t>{1, 2, 3}));
  modes[1].trajectory = {{0.5, 1, 1, 1, 0}};  // suppressed by nothing: it is the best
  modes[4].trajectory = {{50, 1, 1, 1, 0}};
  EXPECT_EQ(erq::select_top_k_modes(modes, 2), (std::vector<std::size_t>{1, 4}));
}

TEST(Clustering, DistinctPointsAreFixed)
{
  std::vector<Vec2> pts;
  for (int i = 0; i < 16; ++i) pts.push_back({3.0 * i, i % 2 ? 1.0 : -1.0});
  auto c = erq::cluster_endpoint_intentions(pts, 16, 4);
  auto key = [](const Vec2 & a, const Vec2 & b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
  std::sort(c.begin(), c.end(), key);
  std::sort(pts.begin(), pts.end(), key);
  EXPECT_EQ(c, pts);
}

TEST(Clustering, TwoClusters)
{
  scrisk::Rng rng(3);
  std::vector<Vec2> pts;
  Vec2 m0, m1;
  for (int i = 0; i < 40; ++i) {
    const Vec2 a{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    const Vec2 b{10 + rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    pts.push_back(a);
    pts.push_back(b);
    m0 = m0 + a * (1.0 / 40);
    m1 = m1 + b * (1.0 / 40);
  }
  auto c = erq::cluster_endpoint_intentions(pts, 2, 9);
  if (c[0].x > c[1].x) std::swap(c[0], c[1]);
  EXPECT_LT((c[0] - m0).norm(), 0.1);
  EXPECT_LT((c[1] - m1).norm(), 0.1);
  // determinism
  EXPECT_EQ(erq::cluster_endpoint_intentions(pts, 2, 9), erq::cluster_endpoint_intentions(pts, 2, 9));
}

TEST(Prediction, ProbabilitiesAndTopMode)
{
  auto m = tiny_model();
  const auto sample = erq::prepare_sample(scenes()[2], m.config);
  const auto all = erq::predict_all_modes(m, sample);
  ASSERT_EQ(all.modes.size(), 12u);
  const auto six = erq::predict(m, sample, 6);
  ASSERT_EQ(six.modes.size(), 6u);
  double total = 0;
  for (const auto & md : six.modes) {
    total += md.probability;
    EXPECT_EQ(md.trajectory.size(), 40u);
    for (const auto & p : md.trajectory) {
      EXPECT_GE(p.sigma_x, m.config.sigma_min);
      EXPECT_LE(std::abs(p.rho), 0.5);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto one = erq::predict(m, sample, 1);
  ASSERT_EQ(one.modes.size(), 1u);
  EXPECT_EQ(one.modes[0].probability, 1.0);
  const auto best = std::max_element(all.modes.begin(), all.modes.end(), [](auto & a, auto & b) { return a.probability < b.probability; });
  EXPECT_EQ(one.modes[0].trajectory, best->trajectory);
  EXPECT_THROW(erq::predict(m, sample, 13), scrisk::ConfigError);
  // deterministic
  EXPECT_EQ(erq::predict(m, sample, 6), six);
}

TEST(Prediction, PaddingInvariance)
{
  auto m = tiny_model();
  auto sample = erq::prepare_sample(scenes()[3], m.config);
  const auto base = erq::predict_all_modes(m, sample);
  erq::pad_agents(sample, sample.agent_valid.size() + 3, m.config);
  EXPECT_EQ(erq::predict_all_modes(m, sample), base);
}

TEST(Checkpoint, SaveLoad)
{
  auto m = tiny_model(5);
  const auto dir = std::filesystem::temp_directory_path() / "scrisk_model_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "m.ckpt").string();
  m.save(path);
  auto loaded = erq::Model::load(path);
  EXPECT_EQ(loaded.config, m.config);
  EXPECT_EQ(loaded.intentions, m.intentions);
  const auto sample = erq::prepare_sample(scenes()[0], m.config);
  EXPECT_EQ(erq::predict(loaded, sample, 3), erq::predict(m, sample, 3));
  auto other = tiny();
  other.d_model = 32;
  EXPECT_THROW(erq::Model::load(path, &other), scrisk::ConfigMismatch);
  std::filesystem::remove_all(dir);
}

TEST(Training, LossDecreasesAndIsDeterministic)
{
  auto a = tiny_model(7);
  auto b = tiny_model(7);
  std::vector<erq::SceneSample> samples;
  for (std::size_t i = 0; i < 4; ++i) samples.push_back(erq::prepare_sample(scenes()[i], a.config));
  erq::TrainConfig tc;
  tc.steps = 30;
  tc.batch_size = 4;
  tc.seed = 2;
  const auto ra = erq::train(a, samples, tc);
  const auto rb = erq::train(b, samples, tc);
  ASSERT_EQ(ra.log.size(), 30u);
  EXPECT_LT(ra.log.back().mean.total, ra.log.front().mean.total);
  EXPECT_EQ(a.store.params().size(), b.store.params().size());
  for (std::size_t i = 0; i < a.store.params().size(); ++i) {
    EXPECT_EQ(a.store[i].value, b.store[i].value);
  }
}

TEST(Training, LearningRateSchedule)
{
  erq::TrainConfig tc;
  tc.lr = 1e-3;
  tc.lr_schedule = {{10, 0.5}, {20, 0.5}};
  EXPECT_EQ(erq::learning_rate_at(tc, 0), 1e-3);
  EXPECT_EQ(erq::learning_rate_at(tc, 10), 5e-4);
  EXPECT_EQ(erq::learning_rate_at(tc, 25), 2.5e-4);
}
