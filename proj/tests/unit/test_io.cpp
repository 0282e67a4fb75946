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

#include <filesystem>
#include <sstream>

#include "scrisk/cli.hpp"
#include "scrisk/errors.hpp"
#include "scrisk/io.hpp"

namespace io = scrisk::io;
namespace sim = scrisk::sim;
namespace fs = std::filesystem;

namespace
{

const sim::GeneratedDataset & dataset()
{
  static const auto ds = sim::generate_dataset(sim::HazardConfig{}, sim::RiskParams{}, sim::RoadLibrary{}, 5, 3);
  return ds;
}

struct TempDir
{
  fs::path path;
  explicit TempDir(const std::string & name) : path(fs::temp_directory_path() / name)
  {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string & f) const { return (path / f).string(); }
};

int cli(const std::vector<std::string> & args, std::string * err_out = nullptr)
{
  std::ostringstream out;
  std::ostringstream err;
  const int rc = scrisk::cli::run(args, out, err);
  if (err_out) {
    *err_out = err.str();
  }
  return rc;
}

}  // namespace

TEST(SceneJson, RoundTrip)
{
  for (const auto & s : dataset().scenes) {
    const auto j = io::scene_to_json(s);
    EXPECT_EQ(j.at("schema"), "scrisk-scene/1");
    const auto back = io::scene_from_json(j);
    EXPECT_EQ(back, s);
    EXPECT_EQ(io::scene_to_json(back).dump(), j.dump());
  }
}

TEST(SceneJson, RejectsBadInput)
{
  auto j = io::scene_to_json(dataset().scenes[0]);
  j["schema"] = "other/1";
  EXPECT_THROW(io::scene_from_json(j), scrisk::FormatError);
  j = io::scene_to_json(dataset().scenes[0]);
  j.erase("agents");
  EXPECT_THROW(io::scene_from_json(j), scrisk::FormatError);
}

TEST(Files, WriteReadAndErrors)
{
  TempDir dir("scrisk_io_files");
  io::write_scene(dir / "nested/s.json", dataset().scenes[1]);
  EXPECT_EQ(io::read_scene(dir / "nested/s.json"), dataset().scenes[1]);
  EXPECT_THROW(io::read_file(dir / "missing.json"), scrisk::IoError);
  io::write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(io::read_json(dir / "bad.json"), scrisk::FormatError);
}

TEST(Manifest, RoundTrip)
{
  io::Manifest m;
  m.seed = 9;
  m.scenes = {{"a.json", "a", 123, "cut_in", true}, {"b.json", "b", 456, "rear_end", false}};
  m.discarded = {{3, 77, "no trigger"}};
  m.config = {{"x", 1}};
  EXPECT_EQ(io::manifest_from_json(io::manifest_to_json(m)), m);
}

TEST(Intents, RoundTripAndValidation)
{
  scrisk::erq::IntentionSet i{{{1.5, -2.0}, {30.25, 0.0}}, {300, 600, 999}};
  EXPECT_EQ(io::intents_from_json(io::intents_to_json(i)), i);
  auto j = io::intents_to_json(i);
  j["risks"] = {999, 300};
  EXPECT_THROW(io::intents_from_json(j), scrisk::FormatError);
}

TEST(Predictions, RoundTrip)
{
  scrisk::erq::PredictionSet p;
  p.scene_id = "s";
  p.method = "cv";
  scrisk::erq::PredictedMode m;
  m.probability = 0.25;
  m.endpoint_index = 3;
  m.risk_index = 1;
  m.trajectory = {{1.0, 2.0, 0.5, 0.25, -0.125}};
  m.velocity = {{3.0, 4.0}};
  m.risk = {{0.5, 0.25, 124.875}};
  p.modes = {m, m};
  EXPECT_EQ(io::prediction_from_json(io::prediction_to_json(p)), p);
  const std::vector<scrisk::erq::PredictionSet> many{p, p};
  EXPECT_EQ(io::predictions_from_json(io::predictions_to_json(many)), many);
}

TEST(Config, RoundTripAndStrictKeys)
{
  io::WorkbenchConfig c;
  c.model.n_end = 8;
  c.training.lr_schedule = {{10, 0.5}};
  c.hazard.decel_threshold.max = 9.0;
  const auto j = io::to_json(c);
  EXPECT_EQ(io::to_json(io::config_from_json(j)), j);
  auto bad = j;
  bad["model"]["widht"] = 3;
  EXPECT_THROW(io::config_from_json(bad), scrisk::ConfigError);
  bad = j;
  bad["model"]["n_heads"] = 5;  // 64 is not divisible by 5
  EXPECT_THROW(io::config_from_json(bad), scrisk::ConfigError);
}

TEST(Svg, StableAndWellFormed)
{
  const auto & s = dataset().scenes[0];
  const auto a = io::render_svg(s, nullptr);
  EXPECT_EQ(a, io::render_svg(s, nullptr));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  EXPECT_EQ(a.find("nan"), std::string::npos);
}

TEST(LossLog, Header)
{
  scrisk::erq::StepLog l;
  l.step = 3;
  l.lr = 0.5;
  const auto csv = io::loss_log_csv({l});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,lr,total,traj,reg,cls,dense,risk");
}

TEST(Cli, ExitCodes)
{
  TempDir dir("scrisk_io_cli");
  std::string err;
  EXPECT_EQ(cli({}, &err), scrisk::cli::kConfigInvalid);
  EXPECT_EQ(cli({"generate", "--out", dir / "d", "--episodes", "2"}, &err), scrisk::cli::kConfigInvalid);
  io::write_file(dir / "cfg.json", R"({"schema": "scrisk-config/1", "surprise": 1})");
  EXPECT_EQ(cli({"generate", "--config", dir / "cfg.json", "--out", dir / "d", "--episodes", "2", "--seed", "1"}, &err), scrisk::cli::kConfigInvalid);
  EXPECT_NE(err.find("surprise"), std::string::npos) << err;
  EXPECT_EQ(cli({"generate", "--config", dir / "nope.json", "--out", dir / "d", "--episodes", "2", "--seed", "1"}, &err), scrisk::cli::kIoFailure);
  io::write_json(dir / "ok.json", io::to_json(io::WorkbenchConfig{}));
  EXPECT_EQ(cli({"generate", "--config", dir / "ok.json", "--out", dir / "d", "--episodes", "2", "--seed", "4"}, &err), scrisk::cli::kOk) << err;
  EXPECT_EQ(io::read_dataset(dir / "d").size(), 2u);
  EXPECT_EQ(
    cli({"train", "--config", dir / "ok.json", "--data", dir / "d", "--intents", dir / "none.json", "--out", dir / "m.ckpt"}, &err),
    scrisk::cli::kIoFailure);
  EXPECT_EQ(cli({"plot", "--scene", dir / "d/missing.json", "--out", dir / "x.svg"}, &err), scrisk::cli::kIoFailure);
}
