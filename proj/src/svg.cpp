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

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace scrisk::io
{

namespace
{

constexpr double kWidth = 800.0;
constexpr double kSceneHeight = 420.0;
constexpr double kPlotTop = 440.0;
constexpr double kPlotHeight = 180.0;
constexpr double kHeight = 660.0;
// scene window in the target frame, metres
constexpr double kAhead = 90.0;
constexpr double kBehind = 30.0;
constexpr double kSide = 31.5;

const char * const kModeColors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // avoid "-0.00"
  return std::string(buf) == "-0.00" ? "0.00" : buf;
}

struct View
{
  geometry::Vec2 origin;
  double heading = 0.0;

  // target frame, x forward and y left, mapped onto the canvas
  geometry::Vec2 map(const geometry::Vec2 & w) const
  {
    const geometry::Vec2 d = w - origin;
    const double c = std::cos(-heading);
    const double s = std::sin(-heading);
    const double lx = c * d.x - s * d.y;
    const double ly = s * d.x + c * d.y;
    const double scale = kWidth / (kAhead + kBehind);
    return {(lx + kBehind) * scale, kSceneHeight / 2.0 - ly * scale};
  }
};

bool inside(const geometry::Vec2 & p)
{
  return p.x >= -50.0 && p.x <= kWidth + 50.0 && p.y >= -50.0 && p.y <= kSceneHeight + 50.0;
}

std::string polyline(const std::vector<geometry::Vec2> & pts, const std::string & style)
{
  std::string out = "<polyline fill=\"none\" " + style + " points=\"";
  bool first = true;
  for (const auto & p : pts) {
    if (!first) {
      out += ' ';
    }
    out += num(p.x) + "," + num(p.y);
    first = false;
  }
  return out + "\"/>\n";
}

}  // namespace

std::string render_svg(const sim::SceneRecord & scene, const erq::PredictionSet * pred)
{
  std::size_t ti = 0;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (scene.agents[i].id == scene.target_agent_id) {
      ti = i;
    }
  }
  const auto & origin_state = scene.agents.at(ti).track.states.at(scene.hazard_frame);
  View view{origin_state.position(), origin_state.heading};

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"#ffffff\"/>\n";
  svg += "<clipPath id=\"scene\"><rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kSceneHeight) +
         "\"/></clipPath>\n";
  svg += "<g clip-path=\"url(#scene)\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kSceneHeight) + "\" fill=\"#f4f4f4\"/>\n";

  // lanes
  for (const auto & lane : scene.map) {
    std::vector<geometry::Vec2> pts;
    for (const auto & p : lane.centerline) {
      pts.push_back(view.map(p));
    }
    if (std::any_of(pts.begin(), pts.end(), inside)) {
      svg += polyline(pts, "stroke=\"#bbbbbb\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"");
    }
  }

  const std::size_t last = scene.agents.front().track.states.size() - 1;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    const auto & a = scene.agents[i];
    const bool target = i == ti;
    const bool trigger = a.id == scene.trigger_agent_id;
    const std::string color = target ? "#1f4e9c" : (trigger ? "#c0392b" : "#666666");
    std::vector<geometry::Vec2> past;
    std::vector<geometry::Vec2> future;
    for (std::size_t k = 0; k < a.track.states.size(); ++k) {
      const auto p = view.map(a.track.states[k].position());
      (k <= scene.hazard_frame ? past : future).push_back(p);
    }
    if (!future.empty()) {
      future.insert(future.begin(), past.back());
    }
    svg += polyline(past, "stroke=\"" + color + "\" stroke-width=\"1.5\" stroke-opacity=\"0.5\"");
    svg += polyline(future, "stroke=\"" + color + "\" stroke-width=\"1.5\" stroke-dasharray=\"2,3\"");
    const auto corners = geometry::footprint_corners(a.track.states[scene.hazard_frame]);
    std::vector<geometry::Vec2> box;
    for (const auto & c : corners) {
      box.push_back(view.map(c));
    }
    std::string pts;
    for (std::size_t c = 0; c < box.size(); ++c) {
      pts += (c ? " " : "") + num(box[c].x) + "," + num(box[c].y);
    }
    svg += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.8\"/>\n";
    const auto label = view.map(a.track.states[scene.hazard_frame].position());
    svg += "<text x=\"" + num(label.x) + "\" y=\"" + num(label.y - 12.0) + "\" fill=\"" + color + "\">" +
           std::to_string(a.id) + "</text>\n";
    (void)last;
  }

  if (pred) {
    for (std::size_t m = 0; m < pred->modes.size(); ++m) {
      const auto & mode = pred->modes[m];
      std::vector<geometry::Vec2> pts{view.map(origin_state.position())};
      for (const auto & g : mode.trajectory) {
        pts.push_back(view.map({g.x, g.y}));
      }
      const std::string color = kModeColors[m % 6];
      const double width = 1.0 + 3.0 * std::clamp(mode.probability, 0.0, 1.0);
      svg += polyline(pts, "stroke=\"" + color + "\" stroke-width=\"" + num(width) + "\"");
      svg += "<circle cx=\"" + num(pts.back().x) + "\" cy=\"" + num(pts.back().y) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
  }
  svg += "</g>\n";
  svg += "<text x=\"8\" y=\"16\">" + scene.scene_id + " (" + sim::to_string(scene.conflict_type) +
         (scene.collision ? ", collision at " + num(scene.collision->time) + " s" : ", no collision") + ")</text>\n";

  // risk panel: time from the start of the scene to its end
  const double t0 = scene.agents.front().track.start_time;
  const double t1 = scene.agents.front().track.time_at(last);
  const double left = 50.0;
  const double right = kWidth - 20.0;
  const auto px = [&](double t) { return left + (t - t0) / (t1 - t0) * (right - left); };
  const auto py = [&](double r) { return kPlotTop + kPlotHeight * (1.0 - std::clamp(r / risk::kCollisionRisk, 0.0, 1.0)); };
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(kPlotTop) + "\" width=\"" + num(right - left) + "\" height=\"" +
         num(kPlotHeight) + "\" fill=\"none\" stroke=\"#999999\"/>\n";
  svg += "<line x1=\"" + num(px(0.0)) + "\" y1=\"" + num(kPlotTop) + "\" x2=\"" + num(px(0.0)) + "\" y2=\"" +
         num(kPlotTop + kPlotHeight) + "\" stroke=\"#c0392b\" stroke-dasharray=\"4,3\"/>\n";
  svg += "<text x=\"" + num(left - 40.0) + "\" y=\"" + num(kPlotTop + 10.0) + "\">1.0</text>\n";
  svg += "<text x=\"" + num(left - 40.0) + "\" y=\"" + num(kPlotTop + kPlotHeight) + "\">0.0</text>\n";
  svg += "<text x=\"" + num(left) + "\" y=\"" + num(kPlotTop + kPlotHeight + 16.0) + "\">" + num(t0) + " s</text>\n";
  svg += "<text x=\"" + num(right - 40.0) + "\" y=\"" + num(kPlotTop + kPlotHeight + 16.0) + "\">" + num(t1) + " s</text>\n";
  svg += "<text x=\"" + num(px(0.0) + 4.0) + "\" y=\"" + num(kPlotTop + 14.0) + "\">normalized risk</text>\n";
  std::vector<geometry::Vec2> gt;
  for (std::size_t k = 0; k < scene.risk.total.size(); ++k) {
    gt.push_back({px(t0 + static_cast<double>(k) / scene.frequency), py(scene.risk.total[k].risk)});
  }
  svg += polyline(gt, "stroke=\"#000000\" stroke-width=\"1.5\"");
  if (pred) {
    for (std::size_t m = 0; m < pred->modes.size(); ++m) {
      std::vector<geometry::Vec2> pts;
      for (std::size_t k = 0; k < pred->modes[m].risk.size(); ++k) {
        const double t = pred->start_time + static_cast<double>(k) / pred->frequency;
        pts.push_back({px(t), py(pred->modes[m].risk[k].risk)});
      }
      svg += polyline(pts, "stroke=\"" + std::string(kModeColors[m % 6]) + "\" stroke-width=\"1\"");
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace scrisk::io
