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

#ifndef SCRISK__IO_HPP_
#define SCRISK__IO_HPP_

#include "scrisk/metrics.hpp"
#include "scrisk/model.hpp"
#include "scrisk/scenario.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace scrisk::io
{

inline constexpr const char * kSceneSchema = "scrisk-scene/1";
inline constexpr const char * kManifestSchema = "scrisk-manifest/1";
inline constexpr const char * kIntentsSchema = "scrisk-intents/1";
inline constexpr const char * kPredictionSchema = "scrisk-pred/1";
inline constexpr const char * kConfigSchema = "scrisk-config/1";

// ---------------------------------------------------------------------------
// configuration

/// Every tunable of the workbench. Unknown keys are rejected on load and all
/// sections are validated.
struct WorkbenchConfig
{
  risk::DrfParams drf;
  risk::CostParams cost;
  double rho_cap = 1.0;  ///< stored in the "cost" section
  sim::HazardConfig hazard;
  erq::ModelConfig model;
  erq::TrainConfig training;
  metrics::MetricsConfig metrics;
  std::size_t k = 6;  ///< modes kept by predict/evaluate, "metrics" section

  sim::RiskParams risk_params() const { return {drf, cost, rho_cap}; }
};

nlohmann::json to_json(const WorkbenchConfig & config);
WorkbenchConfig config_from_json(const nlohmann::json & j);
WorkbenchConfig load_config(const std::string & path);

// ---------------------------------------------------------------------------
// files

std::string read_file(const std::string & path);
/// Writes atomically enough for our purposes: the whole buffer or IoError.
void write_file(const std::string & path, const std::string & bytes);
nlohmann::json read_json(const std::string & path);
/// Compact JSON with a trailing newline.
void write_json(const std::string & path, const nlohmann::json & j);

// ---------------------------------------------------------------------------
// scenes and datasets

nlohmann::json scene_to_json(const sim::SceneRecord & scene);
sim::SceneRecord scene_from_json(const nlohmann::json & j);
void write_scene(const std::string & path, const sim::SceneRecord & scene);
sim::SceneRecord read_scene(const std::string & path);

struct ManifestEntry
{
  std::string file;
  std::string scene_id;
  std::uint64_t seed = 0;
  std::string conflict_type;
  bool collision = false;
  bool operator==(const ManifestEntry &) const = default;
};

struct Manifest
{
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> scenes;
  std::vector<sim::DiscardedEpisode> discarded;
  nlohmann::json config = nlohmann::json::object();
  bool operator==(const Manifest & o) const;
};

nlohmann::json manifest_to_json(const Manifest & m);
Manifest manifest_from_json(const nlohmann::json & j);

/// Scenes of a dataset directory in manifest order.
std::vector<sim::SceneRecord> read_dataset(const std::string & dir);

// ---------------------------------------------------------------------------
// intentions and predictions

nlohmann::json intents_to_json(const erq::IntentionSet & intents);
erq::IntentionSet intents_from_json(const nlohmann::json & j);

nlohmann::json prediction_to_json(const erq::PredictionSet & pred);
erq::PredictionSet prediction_from_json(const nlohmann::json & j);
/// File holding one prediction set per scene.
nlohmann::json predictions_to_json(const std::vector<erq::PredictionSet> & preds);
std::vector<erq::PredictionSet> predictions_from_json(const nlohmann::json & j);

std::string loss_log_csv(const std::vector<erq::StepLog> & log);

// ---------------------------------------------------------------------------
// rendering

/// Scene view: road, agents at the origin, ground-truth futures, predicted
/// modes (if any), and ground-truth vs predicted normalized risk curves.
std::string render_svg(const sim::SceneRecord & scene, const erq::PredictionSet * pred);

}  // namespace scrisk::io

#endif  // SCRISK__IO_HPP_
