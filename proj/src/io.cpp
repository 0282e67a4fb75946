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

#include "scrisk/io.hpp"

#include "scrisk/errors.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace scrisk::io
{

using nlohmann::json;

namespace
{

// strict section reader: rejects unknown keys, type-checks known ones
class Section
{
public:
  Section(const json & j, std::string name) : j_(j), name_(std::move(name))
  {
    if (!j_.is_object()) {
      throw ConfigError(name_ + ": expected an object");
    }
  }

  void allow(std::initializer_list<const char *> keys) const
  {
    for (const auto & item : j_.items()) {
      bool known = false;
      for (const char * k : keys) {
        known = known || item.key() == k;
      }
      if (!known) {
        throw ConfigError("unknown key '" + name_ + "." + item.key() + "'");
      }
    }
  }

  void get(const char * key, double & out) const
  {
    if (!j_.contains(key)) {
      return;
    }
    const json & v = j_.at(key);
    if (v.is_null()) {
      out = std::numeric_limits<double>::infinity();
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      throw ConfigError(name_ + "." + key + " must be a number");
    }
  }

  void get(const char * key, std::size_t & out) const
  {
    if (!j_.contains(key)) {
      return;
    }
    if (!j_.at(key).is_number_unsigned()) {
      throw ConfigError(name_ + "." + key + " must be a non-negative integer");
    }
    out = j_.at(key).get<std::size_t>();
  }

  template <std::size_t N>
  void get(const char * key, std::array<double, N> & out) const
  {
    if (!j_.contains(key)) {
      return;
    }
    const json & v = j_.at(key);
    if (!v.is_array() || v.size() != N) {
      throw ConfigError(name_ + "." + key + " must be an array of " + std::to_string(N) + " numbers");
    }
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) {
        throw ConfigError(name_ + "." + key + " must hold numbers");
      }
      out[i] = v[i].get<double>();
    }
  }

  void get(const char * key, sim::ClippedGaussian & out) const
  {
    if (!j_.contains(key)) {
      return;
    }
    Section s(j_.at(key), name_ + "." + key);
    s.allow({"mean", "stddev", "min", "max"});
    s.get("mean", out.mean);
    s.get("stddev", out.stddev);
    s.get("min", out.min);
    s.get("max", out.max);
    if (j_.at(key).contains("min") && j_.at(key).at("min").is_null()) {
      out.min = -std::numeric_limits<double>::infinity();
    }
  }

  bool has(const char * key) const { return j_.contains(key); }
  const json & at(const char * key) const { return j_.at(key); }

private:
  const json & j_;
  std::string name_;
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json gaussian_json(const sim::ClippedGaussian & g)
{
  return {{"mean", g.mean}, {"stddev", g.stddev}, {"min", finite_or_null(g.min)}, {"max", finite_or_null(g.max)}};
}

}  // namespace

json to_json(const WorkbenchConfig & c)
{
  json lr = json::array();
  for (const auto & [step, factor] : c.training.lr_schedule) {
    lr.push_back({step, factor});
  }
  json metrics = metrics::to_json(c.metrics);
  metrics["k"] = c.k;
  return {
    {"schema", kConfigSchema},
    {"drf",
     {{"A", c.drf.A},
      {"B", c.drf.B},
      {"C", c.drf.C},
      {"D", c.drf.D},
      {"E", c.drf.E},
      {"s_min", c.drf.s_min},
      {"max_curvature", c.drf.max_curvature}}},
    {"cost",
     {{"basic_cost_norm", c.cost.basic_cost_norm},
      {"w_b", c.cost.w_b},
      {"w_a", c.cost.w_a},
      {"w_r", c.cost.w_r},
      {"ref_mass", c.cost.ref_mass},
      {"ref_speed", c.cost.ref_speed},
      {"rho_cap", c.rho_cap}}},
    {"hazard",
     {{"decel_threshold", gaussian_json(c.hazard.decel_threshold)},
      {"lane_offset_threshold", gaussian_json(c.hazard.lane_offset_threshold)},
      {"reaction_delay", gaussian_json(c.hazard.reaction_delay)},
      {"maneuver_mix", c.hazard.maneuver_mix},
      {"conflict_mix", c.hazard.conflict_mix},
      {"candidate_radius", c.hazard.candidate_radius}}},
    {"model", erq::to_json(c.model)},
    {"training",
     {{"steps", c.training.steps},
      {"batch_size", c.training.batch_size},
      {"lr", c.training.lr},
      {"weight_decay", c.training.weight_decay},
      {"lr_schedule", lr},
      {"seed", c.training.seed}}},
    {"metrics", metrics},
  };
}

WorkbenchConfig config_from_json(const json & j)
{
  WorkbenchConfig c;
  Section root(j, "config");
  root.allow({"schema", "drf", "cost", "hazard", "model", "training", "metrics"});
  if (root.has("schema") && root.at("schema") != kConfigSchema) {
    throw ConfigError("config schema must be " + std::string(kConfigSchema));
  }
  if (root.has("drf")) {
    Section s(root.at("drf"), "drf");
    s.allow({"A", "B", "C", "D", "E", "s_min", "max_curvature"});
    s.get("A", c.drf.A);
    s.get("B", c.drf.B);
    s.get("C", c.drf.C);
    s.get("D", c.drf.D);
    s.get("E", c.drf.E);
    s.get("s_min", c.drf.s_min);
    s.get("max_curvature", c.drf.max_curvature);
  }
  if (root.has("cost")) {
    Section s(root.at("cost"), "cost");
    s.allow({"basic_cost_norm", "w_b", "w_a", "w_r", "ref_mass", "ref_speed", "rho_cap"});
    s.get("basic_cost_norm", c.cost.basic_cost_norm);
    s.get("w_b", c.cost.w_b);
    s.get("w_a", c.cost.w_a);
    s.get("w_r", c.cost.w_r);
    s.get("ref_mass", c.cost.ref_mass);
    s.get("ref_speed", c.cost.ref_speed);
    s.get("rho_cap", c.rho_cap);
  }
  if (root.has("hazard")) {
    Section s(root.at("hazard"), "hazard");
    s.allow({"decel_threshold", "lane_offset_threshold", "reaction_delay", "maneuver_mix", "conflict_mix",
             "candidate_radius"});
    s.get("decel_threshold", c.hazard.decel_threshold);
    s.get("lane_offset_threshold", c.hazard.lane_offset_threshold);
    s.get("reaction_delay", c.hazard.reaction_delay);
    s.get("maneuver_mix", c.hazard.maneuver_mix);
    s.get("conflict_mix", c.hazard.conflict_mix);
    s.get("candidate_radius", c.hazard.candidate_radius);
  }
  if (root.has("model")) {
    c.model = erq::model_config_from_json(root.at("model"));
  }
  if (root.has("training")) {
    Section s(root.at("training"), "training");
    s.allow({"steps", "batch_size", "lr", "weight_decay", "lr_schedule", "seed"});
    s.get("steps", c.training.steps);
    s.get("batch_size", c.training.batch_size);
    s.get("lr", c.training.lr);
    s.get("weight_decay", c.training.weight_decay);
    s.get("seed", c.training.seed);
    if (s.has("lr_schedule")) {
      const json & lr = s.at("lr_schedule");
      if (!lr.is_array()) {
        throw ConfigError("training.lr_schedule must be an array of [step, factor] pairs");
      }
      for (const auto & e : lr) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number()) {
          throw ConfigError("training.lr_schedule entries must be [step, factor]");
        }
        c.training.lr_schedule.emplace_back(e[0].get<std::size_t>(), e[1].get<double>());
      }
    }
  }
  if (root.has("metrics")) {
    json m = root.at("metrics");
    if (m.is_object() && m.contains("k")) {
      if (!m.at("k").is_number_unsigned()) {
        throw ConfigError("metrics.k must be a positive integer");
      }
      c.k = m.at("k").get<std::size_t>();
      m.erase("k");
    }
    c.metrics = metrics::metrics_config_from_json(m);
  }

  // cross-module validation
  risk::validate(c.drf);
  risk::validate(c.cost);
  if (!(c.rho_cap > 0.0)) {
    throw ConfigError("cost.rho_cap must be positive");
  }
  sim::validate(c.hazard);
  erq::validate(c.model);
  if (c.training.batch_size == 0) {
    throw ConfigError("training.batch_size must be positive");
  }
  if (!(c.training.lr > 0.0) || !(c.training.weight_decay >= 0.0)) {
    throw ConfigError("training.lr must be positive and weight_decay non-negative");
  }
  for (const auto & [step, factor] : c.training.lr_schedule) {
    if (!(factor > 0.0)) {
      throw ConfigError("training.lr_schedule factors must be positive");
    }
  }
  if (c.k == 0 || c.k > c.model.n_modes()) {
    throw ConfigError("metrics.k must be in [1, n_end * n_risk]");
  }
  return c;
}

WorkbenchConfig load_config(const std::string & path) { return config_from_json(read_json(path)); }

// ---------------------------------------------------------------------------

std::string read_file(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string & path, const std::string & bytes)
{
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) {
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing " + path);
  }
}

json read_json(const std::string & path)
{
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception & e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json(const std::string & path, const json & j) { write_file(path, j.dump() + "\n"); }

// ---------------------------------------------------------------------------
// scenes

namespace
{

json triple_json(const risk::RiskTriple & r) { return {r.probability, r.cost, r.risk}; }

risk::RiskTriple triple_from(const json & j)
{
  if (!j.is_array() || j.size() != 3) {
    throw FormatError("risk entries must be [p, c, r]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename F>
auto guarded(const char * what, F && f)
{
  try {
    return f();
  } catch (const json::exception & e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json scene_to_json(const sim::SceneRecord & s)
{
  json agents = json::array();
  for (const auto & a : s.agents) {
    json states = json::array();
    for (const auto & st : a.track.states) {
      states.push_back(
        {{"x", st.x}, {"y", st.y}, {"heading", st.heading}, {"speed", st.speed}, {"yaw_rate", st.yaw_rate},
         {"accel", st.accel}});
    }
    const geometry::AgentState ref = a.track.states.empty() ? geometry::AgentState{} : a.track.states.front();
    agents.push_back(
      {{"id", a.id}, {"extent_length", ref.length}, {"extent_width", ref.width}, {"mass", ref.mass}, {"states", states}});
  }
  json lanes = json::array();
  json lane_index = json::array();
  for (const auto & l : s.map) {
    json pts = json::array();
    for (const auto & p : l.centerline) {
      pts.push_back({p.x, p.y});
    }
    lanes.push_back({{"id", l.id}, {"centerline", pts}});
    lane_index.push_back(l.lane_index);
  }
  json per_agent = json::array();
  for (const auto & series : s.risk.per_agent) {
    json rows = json::array();
    for (const auto & r : series) {
      rows.push_back(triple_json(r));
    }
    per_agent.push_back(rows);
  }
  json total = json::array();
  for (const auto & r : s.risk.total) {
    total.push_back(triple_json(r));
  }
  json collision = nullptr;
  if (s.collision) {
    collision = {
      {"frame", s.collision->frame},
      {"agents", {s.collision->agent_pair.first, s.collision->agent_pair.second}},
      {"relative_speed", s.collision->relative_speed}};
  }
  const double start = s.agents.empty() ? 0.0 : s.agents.front().track.start_time;
  return {
    {"schema", kSceneSchema},
    {"scene_id", s.scene_id},
    {"conflict_type", sim::to_string(s.conflict_type)},
    {"frequency_hz", s.frequency},
    {"hazard_frame", s.hazard_frame},
    {"target_agent_id", s.target_agent_id},
    {"collision", collision},
    {"agents", agents},
    {"map", {{"lanes", lanes}}},
    {"risk", {{"per_agent", per_agent}, {"total", total}}},
    {"meta",
     {{"start_time", start},
      {"trigger_agent_id", s.trigger_agent_id},
      {"maneuver", sim::to_string(s.maneuver)},
      {"hazard_threshold", s.hazard_threshold},
      {"lane_index", lane_index}}},
  };
}

sim::SceneRecord scene_from_json(const json & j)
{
  return guarded("scene", [&] {
    if (j.at("schema").get<std::string>() != kSceneSchema) {
      throw FormatError("scene schema is not " + std::string(kSceneSchema));
    }
    sim::SceneRecord s;
    s.scene_id = j.at("scene_id").get<std::string>();
    s.conflict_type = sim::conflict_from_string(j.at("conflict_type").get<std::string>());
    s.frequency = j.at("frequency_hz").get<double>();
    s.hazard_frame = j.at("hazard_frame").get<std::size_t>();
    s.target_agent_id = j.at("target_agent_id").get<int>();
    const json & meta = j.contains("meta") ? j.at("meta") : json::object();
    const double start = meta.value("start_time", -static_cast<double>(s.hazard_frame) / s.frequency);
    for (const auto & a : j.at("agents")) {
      sim::AgentTrack t;
      t.id = a.at("id").get<int>();
      t.track.start_time = start;
      t.track.frequency = s.frequency;
      for (const auto & st : a.at("states")) {
        geometry::AgentState x;
        x.x = st.at("x").get<double>();
        x.y = st.at("y").get<double>();
        x.heading = st.at("heading").get<double>();
        x.speed = st.at("speed").get<double>();
        x.yaw_rate = st.at("yaw_rate").get<double>();
        x.accel = st.at("accel").get<double>();
        x.length = a.at("extent_length").get<double>();
        x.width = a.at("extent_width").get<double>();
        x.mass = a.at("mass").get<double>();
        t.track.states.push_back(x);
      }
      s.agents.push_back(std::move(t));
    }
    const json lane_index = meta.value("lane_index", json::array());
    std::size_t li = 0;
    for (const auto & l : j.at("map").at("lanes")) {
      sim::LaneSegment seg;
      seg.id = l.at("id").get<int>();
      seg.lane_index = li < lane_index.size() ? lane_index[li].get<int>() : 0;
      for (const auto & p : l.at("centerline")) {
        seg.centerline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      }
      s.map.push_back(std::move(seg));
      ++li;
    }
    for (const auto & series : j.at("risk").at("per_agent")) {
      std::vector<risk::RiskTriple> rows;
      for (const auto & r : series) {
        rows.push_back(triple_from(r));
      }
      s.risk.per_agent.push_back(std::move(rows));
    }
    for (const auto & r : j.at("risk").at("total")) {
      s.risk.total.push_back(triple_from(r));
    }
    if (!j.at("collision").is_null()) {
      const json & c = j.at("collision");
      geometry::CollisionInfo info;
      info.frame = c.at("frame").get<std::size_t>();
      info.time = start + static_cast<double>(info.frame) / s.frequency;
      info.agent_pair = {c.at("agents").at(0).get<int>(), c.at("agents").at(1).get<int>()};
      info.relative_speed = c.at("relative_speed").get<double>();
      s.collision = info;
    }
    s.trigger_agent_id = meta.value("trigger_agent_id", -1);
    if (meta.contains("maneuver")) {
      s.maneuver = sim::maneuver_from_string(meta.at("maneuver").get<std::string>());
    }
    s.hazard_threshold = meta.value("hazard_threshold", 0.0);

    // structural checks
    bool has_target = false;
    for (const auto & a : s.agents) {
      has_target = has_target || a.id == s.target_agent_id;
      if (a.track.states.size() <= s.hazard_frame) {
        throw FormatError("scene " + s.scene_id + ": agent track ends before the hazard frame");
      }
    }
    if (!has_target) {
      throw FormatError("scene " + s.scene_id + " has no target agent");
    }
    return s;
  });
}

void write_scene(const std::string & path, const sim::SceneRecord & scene) { write_json(path, scene_to_json(scene)); }

sim::SceneRecord read_scene(const std::string & path) { return scene_from_json(read_json(path)); }

bool Manifest::operator==(const Manifest & o) const
{
  if (seed != o.seed || !(scenes == o.scenes) || config != o.config || discarded.size() != o.discarded.size()) {
    return false;
  }
  for (std::size_t i = 0; i < discarded.size(); ++i) {
    const auto & a = discarded[i];
    const auto & b = o.discarded[i];
    if (a.attempt != b.attempt || a.seed != b.seed || a.reason != b.reason) {
      return false;
    }
  }
  return true;
}

json manifest_to_json(const Manifest & m)
{
  json scenes = json::array();
  for (const auto & e : m.scenes) {
    scenes.push_back(
      {{"file", e.file},
       {"scene_id", e.scene_id},
       {"seed", e.seed},
       {"conflict_type", e.conflict_type},
       {"collision", e.collision}});
  }
  json discarded = json::array();
  for (const auto & d : m.discarded) {
    discarded.push_back({{"attempt", d.attempt}, {"seed", d.seed}, {"reason", d.reason}});
  }
  return {
    {"schema", kManifestSchema}, {"seed", m.seed}, {"config", m.config}, {"scenes", scenes}, {"discarded", discarded}};
}

Manifest manifest_from_json(const json & j)
{
  return guarded("manifest", [&] {
    if (j.at("schema").get<std::string>() != kManifestSchema) {
      throw FormatError("manifest schema is not " + std::string(kManifestSchema));
    }
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config");
    for (const auto & e : j.at("scenes")) {
      m.scenes.push_back(
        {e.at("file").get<std::string>(), e.at("scene_id").get<std::string>(), e.at("seed").get<std::uint64_t>(),
         e.at("conflict_type").get<std::string>(), e.at("collision").get<bool>()});
    }
    for (const auto & d : j.at("discarded")) {
      m.discarded.push_back(
        {d.at("attempt").get<std::size_t>(), d.at("seed").get<std::uint64_t>(), d.at("reason").get<std::string>()});
    }
    return m;
  });
}

std::vector<sim::SceneRecord> read_dataset(const std::string & dir)
{
  const std::filesystem::path root(dir);
  const Manifest m = manifest_from_json(read_json((root / "manifest.json").string()));
  std::vector<sim::SceneRecord> scenes;
  scenes.reserve(m.scenes.size());
  for (const auto & e : m.scenes) {
    scenes.push_back(read_scene((root / e.file).string()));
  }
  return scenes;
}

// ---------------------------------------------------------------------------

json intents_to_json(const erq::IntentionSet & in)
{
  json ends = json::array();
  for (const auto & p : in.endpoints) {
    ends.push_back({p.x, p.y});
  }
  return {{"schema", kIntentsSchema}, {"endpoints", ends}, {"risks", in.risks}};
}

erq::IntentionSet intents_from_json(const json & j)
{
  return guarded("intents", [&] {
    if (j.at("schema").get<std::string>() != kIntentsSchema) {
      throw FormatError("intents schema is not " + std::string(kIntentsSchema));
    }
    erq::IntentionSet in;
    for (const auto & p : j.at("endpoints")) {
      in.endpoints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    in.risks = j.at("risks").get<std::vector<double>>();
    try {
      erq::validate(in);
    } catch (const ConfigError & e) {
      throw FormatError(std::string("intents: ") + e.what());
    }
    return in;
  });
}

json prediction_to_json(const erq::PredictionSet & p)
{
  json modes = json::array();
  for (const auto & m : p.modes) {
    json traj = json::array();
    for (const auto & g : m.trajectory) {
      traj.push_back({g.x, g.y, g.sigma_x, g.sigma_y, g.rho});
    }
    json vel = json::array();
    for (const auto & v : m.velocity) {
      vel.push_back({v.x, v.y});
    }
    json risk = json::array();
    for (const auto & r : m.risk) {
      risk.push_back(triple_json(r));
    }
    modes.push_back(
      {{"probability", m.probability},
       {"endpoint_index", m.endpoint_index},
       {"risk_index", m.risk_index},
       {"trajectory", traj},
       {"velocity", vel},
       {"risk", risk}});
  }
  return {
    {"scene_id", p.scene_id},
    {"method", p.method},
    {"start_time", p.start_time},
    {"frequency_hz", p.frequency},
    {"modes", modes}};
}

erq::PredictionSet prediction_from_json(const json & j)
{
  return guarded("prediction", [&] {
    erq::PredictionSet p;
    p.scene_id = j.at("scene_id").get<std::string>();
    p.method = j.at("method").get<std::string>();
    p.start_time = j.at("start_time").get<double>();
    p.frequency = j.at("frequency_hz").get<double>();
    for (const auto & m : j.at("modes")) {
      erq::PredictedMode mode;
      mode.probability = m.at("probability").get<double>();
      mode.endpoint_index = m.at("endpoint_index").get<int>();
      mode.risk_index = m.at("risk_index").get<int>();
      for (const auto & g : m.at("trajectory")) {
        mode.trajectory.push_back(
          {g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<double>(), g.at(3).get<double>(),
           g.at(4).get<double>()});
      }
      for (const auto & v : m.at("velocity")) {
        mode.velocity.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      }
      for (const auto & r : m.at("risk")) {
        mode.risk.push_back(triple_from(r));
      }
      p.modes.push_back(std::move(mode));
    }
    return p;
  });
}

json predictions_to_json(const std::vector<erq::PredictionSet> & preds)
{
  json sets = json::array();
  for (const auto & p : preds) {
    sets.push_back(prediction_to_json(p));
  }
  return {{"schema", kPredictionSchema}, {"predictions", sets}};
}

std::vector<erq::PredictionSet> predictions_from_json(const json & j)
{
  return guarded("predictions", [&] {
    if (j.at("schema").get<std::string>() != kPredictionSchema) {
      throw FormatError("prediction schema is not " + std::string(kPredictionSchema));
    }
    std::vector<erq::PredictionSet> out;
    for (const auto & p : j.at("predictions")) {
      out.push_back(prediction_from_json(p));
    }
    return out;
  });
}

std::string loss_log_csv(const std::vector<erq::StepLog> & log)
{
  std::string out = "step,lr,total,traj,reg,cls,dense,risk\n";
  char buf[256];
  for (const auto & l : log) {
    std::snprintf(
      buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", l.step, l.lr, l.mean.total, l.mean.traj, l.mean.reg,
      l.mean.cls, l.mean.dense, l.mean.risk);
    out += buf;
  }
  return out;
}

}  // namespace scrisk::io
