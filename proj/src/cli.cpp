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

#include "scrisk/cli.hpp"

#include "scrisk/errors.hpp"
#include "scrisk/io.hpp"
#include "scrisk/metrics.hpp"
#include "scrisk/model.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <thread>

namespace scrisk::cli
{

namespace fs = std::filesystem;

unsigned thread_budget()
{
  if (const char * env = std::getenv("SCRISK_THREADS")) {
    char * end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) {
      return static_cast<unsigned>(v);
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace
{

struct Options
{
  std::string config;
  std::string out;
  std::string data;
  std::string intents;
  std::string ckpt;
  std::string scene;
  std::string pred;
  std::string report;
  std::string csv;
  std::string log;
  std::string scene_id;
  std::string method;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t episodes = 0;
  std::size_t k = 0;
  std::size_t steps = 0;
  bool baselines_only = false;
};

io::WorkbenchConfig config_or_default(const std::string & path)
{
  return path.empty() ? io::WorkbenchConfig{} : io::load_config(path);
}

std::vector<erq::SceneSample> samples_of(const std::vector<sim::SceneRecord> & scenes, const erq::ModelConfig & c)
{
  std::vector<erq::SceneSample> out;
  out.reserve(scenes.size());
  for (const auto & s : scenes) {
    out.push_back(erq::prepare_sample(s, c));
  }
  return out;
}

int cmd_generate(const Options & o, std::ostream & out)
{
  const io::WorkbenchConfig cfg = config_or_default(o.config);
  sim::RoadLibrary roads;
  const auto ds = sim::generate_dataset(cfg.hazard, cfg.risk_params(), roads, o.seed, o.episodes, thread_budget());
  io::Manifest manifest;
  manifest.seed = o.seed;
  manifest.config = io::to_json(cfg);
  manifest.discarded = ds.discarded;
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    const auto & s = ds.scenes[i];
    const std::string file = s.scene_id + ".json";
    io::write_scene((fs::path(o.out) / file).string(), s);
    manifest.scenes.push_back({file, s.scene_id, ds.seeds[i], sim::to_string(s.conflict_type), s.collision.has_value()});
  }
  io::write_json((fs::path(o.out) / "manifest.json").string(), io::manifest_to_json(manifest));
  out << "generated " << ds.scenes.size() << " scenes, discarded " << ds.discarded.size() << " episodes\n";
  if (ds.scenes.size() < o.episodes) {
    out << "warning: attempt budget exhausted before " << o.episodes << " scenes were kept\n";
  }
  return kOk;
}

int cmd_risk(const Options & o, std::ostream & out)
{
  const io::WorkbenchConfig cfg = config_or_default(o.config);
  sim::SceneRecord scene = io::read_scene(o.scene);
  const auto & target = scene.target();
  std::vector<geometry::Trajectory> others;
  for (const auto & a : scene.agents) {
    if (a.id != scene.target_agent_id) {
      others.push_back(a.track);
    }
  }
  auto timeline = risk::scene_risk_history(target.track, others, cfg.drf, cfg.cost, cfg.rho_cap);
  for (auto & series : timeline.per_agent) {
    for (auto & r : series) {
      r = {sim::quantize(r.probability), sim::quantize(r.cost), sim::quantize(r.risk)};
    }
  }
  double peak = 0.0;
  for (auto & r : timeline.total) {
    r = {sim::quantize(r.probability), sim::quantize(r.cost), sim::quantize(r.risk)};
    peak = std::max(peak, r.risk);
  }
  scene.risk = std::move(timeline);
  io::write_scene(o.out.empty() ? o.scene : o.out, scene);
  out << scene.scene_id << ": peak risk " << peak << "\n";
  return kOk;
}

int cmd_cluster(const Options & o, std::ostream & out)
{
  const io::WorkbenchConfig cfg = config_or_default(o.config);
  const auto scenes = io::read_dataset(o.data);
  std::vector<geometry::Vec2> ends;
  for (const auto & s : scenes) {
    ends.push_back(erq::endpoint_in_origin_frame(s, cfg.model.t_fut));
  }
  erq::IntentionSet in;
  in.endpoints = erq::cluster_endpoint_intentions(ends, cfg.model.n_end, o.seed_set ? o.seed : cfg.training.seed);
  in.risks = erq::default_risk_intentions(cfg.model.n_risk);
  io::write_json(o.out, io::intents_to_json(in));
  out << "clustered " << ends.size() << " endpoints into " << in.endpoints.size() << " intentions\n";
  return kOk;
}

int cmd_train(const Options & o, std::ostream & out)
{
  io::WorkbenchConfig cfg = config_or_default(o.config);
  if (o.seed_set) {
    cfg.training.seed = o.seed;
  }
  if (o.steps > 0) {
    cfg.training.steps = o.steps;
  }
  erq::Model model;
  model.config = cfg.model;
  model.intentions = io::intents_from_json(io::read_json(o.intents));
  if (model.intentions.endpoints.size() != cfg.model.n_end || model.intentions.risks.size() != cfg.model.n_risk) {
    throw ConfigMismatch("intention file does not match model.n_end / model.n_risk");
  }
  const auto scenes = io::read_dataset(o.data);
  const auto samples = samples_of(scenes, cfg.model);
  model.initialize(cfg.training.seed);
  const auto result = erq::train(model, samples, cfg.training, {});
  model.save(o.out);
  io::write_file(o.log.empty() ? o.out + ".loss.csv" : o.log, io::loss_log_csv(result.log));
  if (result.diverged) {
    out << "non-finite loss after " << result.log.size() << " steps; kept the last finite parameters\n";
    return kNonFiniteLoss;
  }
  if (!result.log.empty()) {
    out << "trained " << result.log.size() << " steps, final loss " << result.log.back().mean.total << "\n";
  }
  return kOk;
}

int cmd_predict(const Options & o, std::ostream & out)
{
  erq::Model model = erq::Model::load(o.ckpt);
  const std::size_t k = o.k ? o.k : std::min<std::size_t>(6, model.config.n_modes());
  const auto scenes = io::read_dataset(o.data);
  std::vector<erq::PredictionSet> preds;
  for (const auto & s : scenes) {
    preds.push_back(erq::predict(model, s, k));
  }
  io::write_json(o.out, io::predictions_to_json(preds));
  out << "predicted " << preds.size() << " scenes with k = " << k << "\n";
  return kOk;
}

int cmd_evaluate(const Options & o, std::ostream & out)
{
  const io::WorkbenchConfig cfg = config_or_default(o.config);
  const auto scenes = io::read_dataset(o.data);
  metrics::MetricsReport report;
  report.meta = {{"scenes", scenes.size()}, {"metrics", metrics::to_json(cfg.metrics)}};

  if (!o.baselines_only) {
    if (o.ckpt.empty()) {
      throw ConfigError("evaluate needs --ckpt unless --baselines-only is given");
    }
    erq::Model model = erq::Model::load(o.ckpt);
    const std::size_t k = o.k ? o.k : cfg.k;
    if (k > model.config.n_modes()) {
      throw ConfigError("k exceeds the number of modes of the checkpoint");
    }
    std::vector<metrics::SceneEvaluation> evals;
    for (const auto & s : scenes) {
      evals.push_back(metrics::evaluate_scene(erq::predict(model, s, k), s, cfg.metrics));
    }
    metrics::aggregate(report, "erq", evals);
    report.meta["k"] = k;
    report.meta["model"] = model.meta();
  }
  const std::size_t t_fut = cfg.model.t_fut;
  for (const char * method : {"cv", "ca"}) {
    std::vector<metrics::SceneEvaluation> evals;
    for (const auto & s : scenes) {
      const auto pred = std::string(method) == "cv" ? metrics::constant_velocity_baseline(s, t_fut, cfg.risk_params())
                                                    : metrics::constant_acceleration_baseline(s, t_fut, cfg.risk_params());
      evals.push_back(metrics::evaluate_scene(pred, s, cfg.metrics));
    }
    metrics::aggregate(report, method, evals);
  }
  io::write_json(o.report, metrics::to_json(report));
  const std::string csv = o.csv.empty() ? fs::path(o.report).replace_extension(".csv").string() : o.csv;
  io::write_file(csv, metrics::to_csv(report));
  out << "evaluated " << scenes.size() << " scenes; report " << o.report << ", table " << csv << "\n";
  return kOk;
}

int cmd_plot(const Options & o, std::ostream & out)
{
  const sim::SceneRecord scene = io::read_scene(o.scene);
  std::optional<erq::PredictionSet> pred;
  if (!o.pred.empty()) {
    for (auto & p : io::predictions_from_json(io::read_json(o.pred))) {
      if (p.scene_id == scene.scene_id && (o.method.empty() || p.method == o.method)) {
        pred = std::move(p);
        break;
      }
    }
    if (!pred) {
      throw FormatError("no prediction for scene " + scene.scene_id + " in " + o.pred);
    }
  }
  io::write_file(o.out, io::render_svg(scene, pred ? &*pred : nullptr));
  out << "wrote " << o.out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Safety-critical trajectory prediction workbench"};
  app.name("scrisk");
  app.require_subcommand(1);
  Options o;

  auto * gen = app.add_subcommand("generate", "simulate hazard episodes into a dataset directory");
  gen->add_option("--config", o.config, "workbench config JSON");
  gen->add_option("--out", o.out, "output directory")->required();
  gen->add_option("--seed", o.seed, "master seed")->required();
  gen->add_option("--episodes,-n", o.episodes, "scenes to keep")->required();

  auto * rsk = app.add_subcommand("risk", "recompute the risk timeline of a scene file");
  rsk->add_option("--config", o.config, "workbench config JSON");
  rsk->add_option("--scene", o.scene, "scene JSON")->required();
  rsk->add_option("--out", o.out, "output scene JSON (default: overwrite)");

  auto * clu = app.add_subcommand("cluster", "k-means++ endpoint intentions from a dataset");
  clu->add_option("--config", o.config, "workbench config JSON");
  clu->add_option("--data", o.data, "dataset directory")->required();
  clu->add_option("--out", o.out, "intention JSON")->required();
  clu->add_option("--seed", o.seed, "clustering seed")->each([&](const std::string &) { o.seed_set = true; });

  auto * trn = app.add_subcommand("train", "train the model and write a checkpoint");
  trn->add_option("--config", o.config, "workbench config JSON");
  trn->add_option("--data", o.data, "dataset directory")->required();
  trn->add_option("--intents", o.intents, "intention JSON")->required();
  trn->add_option("--out", o.out, "checkpoint path")->required();
  trn->add_option("--seed", o.seed, "training seed")->each([&](const std::string &) { o.seed_set = true; });
  trn->add_option("--steps", o.steps, "override training.steps");
  trn->add_option("--log", o.log, "loss log CSV (default: <out>.loss.csv)");

  auto * prd = app.add_subcommand("predict", "top-k predictions for every scene of a dataset");
  prd->add_option("--ckpt", o.ckpt, "checkpoint")->required();
  prd->add_option("--data", o.data, "dataset directory")->required();
  prd->add_option("--out", o.out, "prediction JSON")->required();
  prd->add_option("--k", o.k, "modes per scene");

  auto * evl = app.add_subcommand("evaluate", "metrics report for the model and the CV/CA baselines");
  evl->add_option("--config", o.config, "workbench config JSON");
  evl->add_option("--ckpt", o.ckpt, "checkpoint");
  evl->add_option("--data", o.data, "dataset directory")->required();
  evl->add_option("--report", o.report, "report JSON")->required();
  evl->add_option("--csv", o.csv, "report CSV (default: report path with .csv)");
  evl->add_option("--k", o.k, "modes per scene (default: metrics.k)");
  evl->add_flag("--baselines-only", o.baselines_only, "skip the model, report CV/CA only");

  auto * plt = app.add_subcommand("plot", "render a scene (and predictions) to SVG");
  plt->add_option("--scene", o.scene, "scene JSON")->required();
  plt->add_option("--pred", o.pred, "prediction JSON");
  plt->add_option("--method", o.method, "prediction method to draw when several are present");
  plt->add_option("--out", o.out, "SVG path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError & e) {
    err << "error: " << e.what() << "\n";
    return kConfigInvalid;
  }

  try {
    if (gen->parsed()) {
      return cmd_generate(o, out);
    }
    if (rsk->parsed()) {
      return cmd_risk(o, out);
    }
    if (clu->parsed()) {
      return cmd_cluster(o, out);
    }
    if (trn->parsed()) {
      return cmd_train(o, out);
    }
    if (prd->parsed()) {
      return cmd_predict(o, out);
    }
    if (evl->parsed()) {
      return cmd_evaluate(o, out);
    }
    if (plt->parsed()) {
      return cmd_plot(o, out);
    }
  } catch (const ConfigError & e) {
    err << "config error: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const ConfigMismatch & e) {
    err << "config error: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const IoError & e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const FormatError & e) {
    err << "format error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const Error & e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::filesystem::filesystem_error & e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  }
  return kFailure;
}

}  // namespace scrisk::cli
