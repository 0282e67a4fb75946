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

#ifndef SCRISK__MODEL_HPP_
#define SCRISK__MODEL_HPP_

#include "scrisk/geometry.hpp"
#include "scrisk/layers.hpp"
#include "scrisk/risk_field.hpp"
#include "scrisk/scenario.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scrisk::erq
{

using tensor::Graph;
using tensor::ParamStore;
using tensor::Tensor;
using tensor::Var;

struct ModelConfig
{
  std::size_t d_model = 64;
  std::size_t n_enc = 2;
  std::size_t n_dec = 2;
  std::size_t n_heads = 4;
  std::size_t n_end = 16;
  std::size_t n_risk = 3;
  std::size_t t_hist = 20;   ///< frames, including the prediction origin
  std::size_t t_fut = 100;   ///< frames after the origin
  double dropout = 0.1;
  double lambda_dense = 1.0;
  double lambda_risk = 0.3;
  double sigma_min = 0.1;    ///< m
  std::size_t max_agents = 16;      ///< other agents kept (nearest first)
  std::size_t max_map_tokens = 32;  ///< lane segments kept (nearest first)
  double anchor_scale = 5.0;        ///< m per unit of trajectory-head output
  double velocity_weight = 0.2;

  std::size_t n_modes() const { return n_end * n_risk; }
  bool operator==(const ModelConfig &) const = default;
};

void validate(const ModelConfig & config);
nlohmann::json to_json(const ModelConfig & config);
/// Throws ConfigError naming unknown or ill-typed keys.
ModelConfig model_config_from_json(const nlohmann::json & j);

/// Endpoint intentions (target frame at the prediction origin) and scalar risk
/// intentions on the 0-999 scale.
struct IntentionSet
{
  std::vector<geometry::Vec2> endpoints;
  std::vector<double> risks;
  bool operator==(const IntentionSet &) const = default;
};

void validate(const IntentionSet & intentions);
/// {300, 600, 999} for three levels; otherwise evenly spaced up to 999.
std::vector<double> default_risk_intentions(std::size_t n_risk);

// ---------------------------------------------------------------------------
// inputs

/// Model inputs of one scene in the target frame at the prediction origin
/// (origin at the target's position, x along its heading).
struct SceneSample
{
  std::string scene_id;
  geometry::Vec2 origin;
  double heading = 0.0;

  /// per agent (target first) T_h x kAgentFeatures; padded agents are zeros
  std::vector<Tensor> agent_features;
  std::vector<bool> agent_valid;
  Tensor agent_pos;  ///< (N_a + 1) x 2, position at the origin frame
  std::vector<int> agent_ids;

  std::vector<Tensor> map_features;  ///< per lane segment P x kMapFeatures
  Tensor map_pos;                    ///< N_m x 2

  /// per other agent T_h x kRiskFeatures (probability, cost, risk / 999, time)
  std::vector<Tensor> risk_features;

  // supervision (present when the scene extends T_f frames past the origin)
  bool has_future = false;
  Tensor dense_gt;      ///< (N_a + 1) x (T_f * 4): x, y, vx, vy per frame
  Tensor dense_anchor;  ///< same layout, constant-velocity extrapolation
  Tensor target_anchor_pos;  ///< T_f x 2
  Tensor target_anchor_vel;  ///< 1 x 2
  Tensor gt_traj;       ///< T_f x 2
  Tensor gt_vel;        ///< T_f x 2
  Tensor gt_risk;       ///< T_f x 3, risk channel divided by 999
  double gt_max_risk = 0.0;  ///< 0-999
};

inline constexpr std::size_t kAgentFeatures = 13;
inline constexpr std::size_t kMapFeatures = 5;
inline constexpr std::size_t kRiskFeatures = 4;

/// Builds the inputs at frame `scene.hazard_frame`. Throws MissingRisk when the
/// risk timeline does not cover the history and InsufficientHistory when the
/// scene starts after origin - T_h + 1.
SceneSample prepare_sample(const sim::SceneRecord & scene, const ModelConfig & config);
/// Appends invalid (masked) agents until there are `n_agents` besides the target.
void pad_agents(SceneSample & sample, std::size_t n_agents, const ModelConfig & config);
/// Maps a point of the sample frame to world coordinates and back.
geometry::Vec2 to_world(const SceneSample & s, const geometry::Vec2 & local);
geometry::Vec2 to_local(const SceneSample & s, const geometry::Vec2 & world);

// ---------------------------------------------------------------------------
// network

struct EncodedScene
{
  Var agents;  ///< E_A: (N_a + 1) x D
  Var map;     ///< E_M: N_m x D (absent rows when the map is empty)
  Var risk;    ///< E_R: N_a x D
  std::size_t n_agents = 0;
  std::size_t n_map = 0;
  std::size_t n_risk_tokens = 0;
  Tensor agent_pe;
  Tensor map_pe;
  Tensor risk_pe;
  std::vector<bool> agent_mask;
  std::vector<bool> map_mask;
  std::vector<bool> risk_mask;
};

/// Polyline encoders (per-point MLP + max-pool) and N_enc masked self-attention
/// layers over [agents | map | risk] tokens with sinusoidal position terms.
EncodedScene encode_scene(Graph & g, ParamStore & store, const ModelConfig & config, const SceneSample & sample);

struct DenseFuture
{
  Var prediction;  ///< (N_a + 1) x (T_f * 4)
  Var loss;        ///< smooth-L1 over valid agents (zero without supervision)
};

/// Auxiliary dense prediction of every agent's future (loss only; agent tokens
/// are not modified).
DenseFuture dense_future(Graph & g, ParamStore & store, const ModelConfig & config, const EncodedScene & enc, const SceneSample & sample);

struct IntentionEmbedding
{
  Var endpoints;  ///< T^t: N_end x D
  Var risks;      ///< T^r: N_risk x D
};

IntentionEmbedding embed_intentions(Graph & g, ParamStore & store, const ModelConfig & config, const IntentionSet & intentions);

struct DecoderState
{
  Var endpoint_queries;  ///< Q^t: N_end x D
  Var risk_queries;      ///< Q^r: N_risk x D
};

/// Zero queries for the first decoder layer.
DecoderState initial_queries(Graph & g, const ModelConfig & config);

struct LayerOutput
{
  Var modes;   ///< Q_i: (N_end * N_risk) x D, row m = e * N_risk + r
  Var logits;  ///< (N_end * N_risk) x 1
  /// rows of the heads below, as flat mode indices
  std::vector<std::size_t> head_rows;
  Var trajectory;  ///< |head_rows| x (T_f * 7): dx, dy, sigma_x, sigma_y, rho raw, dvx, dvy
  Var risk;        ///< |head_rows| x (T_f * 3), normalized channels
  DecoderState next;
};

/// One ERQ decoder layer: self-attention over each query set with the
/// intention embeddings as position terms, cross-attention of the endpoint
/// queries into agents and map and of the risk queries into the risk tokens,
/// extension of both onto the mode grid, MLP fusion, per-layer heads and the
/// axis means that form the next layer's queries. Heads are evaluated for
/// `head_rows` (all modes when null).
LayerOutput decode_layer(
  Graph & g, ParamStore & store, const ModelConfig & config, std::size_t layer, const DecoderState & state,
  const IntentionEmbedding & intents, const EncodedScene & enc, const std::vector<std::size_t> * head_rows = nullptr);

/// Interpreted trajectory head output of one mode.
struct ModeTensors
{
  Var mu;        ///< T_f x 2
  Var sigma;     ///< T_f x 2, >= sigma_min
  Var rho;       ///< T_f x 1, |rho| <= 0.5
  Var velocity;  ///< T_f x 2
  Var risk;      ///< T_f x 3
};

ModeTensors mode_tensors(Graph & g, const ModelConfig & config, const LayerOutput & out, std::size_t head_row, const SceneSample & sample);

// ---------------------------------------------------------------------------
// training objective

struct LossBreakdown
{
  double traj = 0.0;   ///< L_reg + L_cls, summed over decoder layers
  double reg = 0.0;
  double cls = 0.0;
  double dense = 0.0;
  double risk = 0.0;   ///< summed over decoder layers
  double total = 0.0;
  std::size_t i_star = 0;
  std::size_t j_star = 0;
  std::size_t mode = 0;  ///< i_star * N_risk + j_star
};

/// (i*, j*): nearest endpoint intention to the ground-truth endpoint and the
/// risk intention nearest to the maximum ground-truth risk. Ties go to the
/// lower index.
std::pair<std::size_t, std::size_t> hard_assign(
  const IntentionSet & intentions, const geometry::Vec2 & gt_endpoint, double gt_max_risk);

struct LossResult
{
  Var total;
  LossBreakdown breakdown;
};

/// Per-layer losses of the coupled assignment, summed over layers, plus the
/// dense term: total = L_traj + lambda_dense L_dense + lambda_risk L_risk.
LossResult hard_assign_and_losses(
  Graph & g, const ModelConfig & config, const std::vector<LayerOutput> & layers, const DenseFuture & dense,
  const SceneSample & sample, const IntentionSet & intentions);

// ---------------------------------------------------------------------------
// model, prediction

struct Model
{
  ModelConfig config;
  IntentionSet intentions;
  ParamStore store;

  /// Creates every parameter by running one forward pass on a synthetic scene.
  void initialize(std::uint64_t seed);
  nlohmann::json meta() const;
  void save(const std::string & path) const;
  /// Throws ConfigMismatch when `expected` is given and differs from the
  /// checkpoint's configuration.
  static Model load(const std::string & path, const ModelConfig * expected = nullptr);
};

/// Full forward pass; training graphs enable dropout. Heads are evaluated
/// for all modes of the last layer only when `all_modes` is set, otherwise
/// only for the hard-assigned mode (training).
struct ForwardPass
{
  EncodedScene encoded;
  DenseFuture dense;
  std::vector<LayerOutput> layers;
};

ForwardPass forward(Graph & g, Model & model, const SceneSample & sample, bool all_modes);

struct GaussianPoint
{
  double x = 0.0;
  double y = 0.0;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double rho = 0.0;
  bool operator==(const GaussianPoint &) const = default;
};

struct PredictedMode
{
  std::vector<GaussianPoint> trajectory;  ///< world-frame means; sigma/rho in the origin frame axes
  std::vector<geometry::Vec2> velocity;   ///< world frame
  std::vector<risk::RiskTriple> risk;     ///< risk on 0-999
  double probability = 0.0;
  int endpoint_index = -1;
  int risk_index = -1;
  bool operator==(const PredictedMode &) const = default;
};

struct PredictionSet
{
  std::string scene_id;
  std::string method = "erq";
  double start_time = 0.05;  ///< time of the first predicted point after the origin
  double frequency = geometry::kDefaultFrequency;
  std::vector<PredictedMode> modes;
  bool operator==(const PredictionSet &) const = default;
};

/// All N_end * N_risk final-layer modes, probabilities from a softmax over all of them.
PredictionSet predict_all_modes(Model & model, const SceneSample & sample);
/// Top-k modes (select_top_k_modes), probabilities renormalized over them.
PredictionSet predict(Model & model, const sim::SceneRecord & scene, std::size_t k);
PredictionSet predict(Model & model, const SceneSample & sample, std::size_t k);

/// Greedy by descending probability with non-maximum suppression of endpoints
/// closer than `radius`; backfills by probability when fewer than k survive.
/// Returns indices into `modes`.
std::vector<std::size_t> select_top_k_modes(const std::vector<PredictedMode> & modes, std::size_t k, double radius = 2.0);

/// Target endpoint T_f frames after the origin, in the origin frame.
geometry::Vec2 endpoint_in_origin_frame(const sim::SceneRecord & scene, std::size_t t_fut);

/// Lloyd's algorithm with k-means++ seeding (100 iterations, tolerance 1e-6).
/// Throws EmptyDataset when fewer than k points are given.
std::vector<geometry::Vec2> cluster_endpoint_intentions(
  const std::vector<geometry::Vec2> & endpoints, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// training

struct TrainConfig
{
  std::size_t steps = 200;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 0.01;
  /// (step, factor): from `step` on the learning rate is multiplied by `factor`
  std::vector<std::pair<std::size_t, double>> lr_schedule;
  std::uint64_t seed = 0;
};

double learning_rate_at(const TrainConfig & config, std::size_t step);

struct StepLog
{
  std::size_t step = 0;
  double lr = 0.0;
  LossBreakdown mean;  ///< batch means
};

struct TrainResult
{
  std::vector<StepLog> log;
  bool diverged = false;  ///< a non-finite loss stopped training; parameters are the last good ones
};

/// Mini-batches are drawn by a per-epoch shuffle seeded from config.seed;
/// gradients of a batch are summed in sample order.
TrainResult train(
  Model & model, const std::vector<SceneSample> & samples, const TrainConfig & config,
  const std::function<void(const StepLog &)> & on_step = {});

}  // namespace scrisk::erq

#endif  // SCRISK__MODEL_HPP_
