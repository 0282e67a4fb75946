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

// Python extension: geometry, risk field, scenario generation, prediction and
// the command-line entry point. Structured records cross the boundary as JSON
// text; the Python package turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "scrisk/cli.hpp"
#include "scrisk/errors.hpp"
#include "scrisk/geometry.hpp"
#include "scrisk/io.hpp"
#include "scrisk/model.hpp"
#include "scrisk/risk_field.hpp"
#include "scrisk/scenario.hpp"

namespace py = pybind11;
namespace g = scrisk::geometry;
namespace risk = scrisk::risk;

namespace
{

scrisk::io::WorkbenchConfig config_or_default(const std::string & config_json)
{
  if (config_json.empty()) {
    return {};
  }
  return scrisk::io::config_from_json(nlohmann::json::parse(config_json));
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Driver risk field, hazard scenario generation and risk-aware trajectory prediction.";

  py::register_exception<scrisk::Error>(m, "ScriskError", PyExc_RuntimeError);

  py::class_<g::AgentState>(m, "AgentState")
    .def(
      py::init([](double x, double y, double heading, double speed, double yaw_rate, double length, double width, double mass) {
        g::AgentState s;
        s.x = x;
        s.y = y;
        s.heading = heading;
        s.speed = speed;
        s.yaw_rate = yaw_rate;
        s.length = length;
        s.width = width;
        s.mass = mass;
        return s;
      }),
      py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("heading") = 0.0, py::arg("speed") = 0.0, py::arg("yaw_rate") = 0.0,
      py::arg("length") = 4.5, py::arg("width") = 1.8, py::arg("mass") = 1500.0)
    .def_readwrite("x", &g::AgentState::x)
    .def_readwrite("y", &g::AgentState::y)
    .def_readwrite("heading", &g::AgentState::heading)
    .def_readwrite("speed", &g::AgentState::speed)
    .def_readwrite("yaw_rate", &g::AgentState::yaw_rate)
    .def_readwrite("accel", &g::AgentState::accel)
    .def_readwrite("length", &g::AgentState::length)
    .def_readwrite("width", &g::AgentState::width)
    .def_readwrite("mass", &g::AgentState::mass)
    .def("__repr__", [](const g::AgentState & s) {
      std::ostringstream os;
      os << "AgentState(x=" << s.x << ", y=" << s.y << ", heading=" << s.heading << ", speed=" << s.speed << ")";
      return os.str();
    });

  py::class_<risk::DrfParams>(m, "DrfParams")
    .def(py::init<>())
    .def_readwrite("A", &risk::DrfParams::A)
    .def_readwrite("B", &risk::DrfParams::B)
    .def_readwrite("C", &risk::DrfParams::C)
    .def_readwrite("D", &risk::DrfParams::D)
    .def_readwrite("E", &risk::DrfParams::E)
    .def_readwrite("s_min", &risk::DrfParams::s_min)
    .def_readwrite("max_curvature", &risk::DrfParams::max_curvature);

  py::class_<risk::CostParams>(m, "CostParams")
    .def(py::init<>())
    .def_readwrite("w_b", &risk::CostParams::w_b)
    .def_readwrite("w_a", &risk::CostParams::w_a)
    .def_readwrite("w_r", &risk::CostParams::w_r);

  py::class_<risk::RiskTriple>(m, "RiskTriple")
    .def_readonly("probability", &risk::RiskTriple::probability)
    .def_readonly("cost", &risk::RiskTriple::cost)
    .def_readonly("risk", &risk::RiskTriple::risk)
    .def("__repr__", [](const risk::RiskTriple & r) {
      std::ostringstream os;
      os << "RiskTriple(probability=" << r.probability << ", cost=" << r.cost << ", risk=" << r.risk << ")";
      return os.str();
    });

  m.def(
    "arc_coordinates",
    [](const g::AgentState & target, double x, double y, double max_curvature) {
      const auto c = g::project_to_arc(g::arc_frame_from_state(target, max_curvature), {x, y});
      return py::make_tuple(c.s, c.t);
    },
    py::arg("target"), py::arg("x"), py::arg("y"), py::arg("max_curvature") = g::kDefaultMaxCurvature,
    "(s, t) of a world point in the target's arc frame.");
  m.def(
    "arc_point",
    [](const g::AgentState & target, double s, double t, double max_curvature) {
      const auto p = g::embed_in_arc(g::arc_frame_from_state(target, max_curvature), {s, t});
      return py::make_tuple(p.x, p.y);
    },
    py::arg("target"), py::arg("s"), py::arg("t"), py::arg("max_curvature") = g::kDefaultMaxCurvature,
    "World point at arc coordinates (s, t) of the target.");
  m.def("look_ahead", &risk::look_ahead, py::arg("speed"), py::arg("params") = risk::DrfParams{});
  m.def(
    "drf_probability",
    [](const g::AgentState & target, double x, double y, const risk::DrfParams & p) { return risk::drf_probability(target, {x, y}, p); },
    py::arg("target"), py::arg("x"), py::arg("y"), py::arg("params") = risk::DrfParams{});
  m.def(
    "collision_cost", &risk::collision_cost, py::arg("target"), py::arg("obstacle"), py::arg("params") = risk::CostParams{});
  m.def(
    "pairwise_risk", &risk::pairwise_risk, py::arg("target"), py::arg("obstacle"), py::arg("drf") = risk::DrfParams{},
    py::arg("cost") = risk::CostParams{}, py::arg("rho_cap") = 1.0);

  m.def(
    "_generate_dataset",
    [](const std::string & config_json, std::uint64_t seed, std::size_t n, unsigned threads) {
      const auto cfg = config_or_default(config_json);
      scrisk::sim::GeneratedDataset ds;
      {
        py::gil_scoped_release release;
        ds = scrisk::sim::generate_dataset(cfg.hazard, cfg.risk_params(), scrisk::sim::RoadLibrary{}, seed, n, threads);
      }
      std::vector<std::string> out;
      out.reserve(ds.scenes.size());
      for (const auto & s : ds.scenes) {
        out.push_back(scrisk::io::scene_to_json(s).dump());
      }
      return out;
    },
    py::arg("config_json"), py::arg("seed"), py::arg("n"), py::arg("threads") = 1);

  m.def(
    "_predict",
    [](const std::string & ckpt, const std::string & scene_json, std::size_t k) {
      auto model = scrisk::erq::Model::load(ckpt);
      const auto scene = scrisk::io::scene_from_json(nlohmann::json::parse(scene_json));
      return scrisk::io::prediction_to_json(scrisk::erq::predict(model, scene, k)).dump();
    },
    py::arg("checkpoint"), py::arg("scene_json"), py::arg("k") = 6);

  m.def(
    "run_cli",
    [](const std::vector<std::string> & args) {
      std::ostringstream out;
      std::ostringstream err;
      int rc = 0;
      {
        py::gil_scoped_release release;
        rc = scrisk::cli::run(args, out, err);
      }
      return py::make_tuple(rc, out.str(), err.str());
    },
    py::arg("args"), "Runs a scrisk subcommand in-process; returns (exit_code, stdout, stderr).");
}
