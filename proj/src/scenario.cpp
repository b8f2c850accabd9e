#include "ralacs/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ralacs/actions.hpp"
#include "ralacs/flow_fusion.hpp"
#include "ralacs/rng.hpp"

namespace ralacs {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_action_token(const std::string& tok) {
  if (tok == "none" || tok == "-") return -1;
  if (!tok.empty() && (isdigit(static_cast<unsigned char>(tok[0])) || tok[0] == '-'))
    return std::stoi(tok);
  return action_id(tok);
}

// first pixel whose center (p + 0.5) falls inside [lo, hi)
void pixel_span(double lo, double hi, int limit, int& first, int& last) {
  first = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
  last = std::min(limit - 1, static_cast<int>(std::ceil(hi - 0.5)) - 1);
}

}  // namespace

void Scenario::validate() const {
  if (duration < 1) throw std::invalid_argument("scenario: duration must be >= 1");
  if (width < 8 || height < 8) throw std::invalid_argument("scenario: image too small");
  if (fps <= 0.0) throw std::invalid_argument("scenario: fps must be > 0");
  if (n_actions < 1) throw std::invalid_argument("scenario: n_actions must be >= 1");
  for (const auto& agent : agents) {
    if (agent.waypoints.empty())
      throw std::invalid_argument("scenario: agent without waypoints");
    for (std::size_t i = 0; i < agent.waypoints.size(); ++i) {
      const auto& wp = agent.waypoints[i];
      if (i > 0 && wp.frame <= agent.waypoints[i - 1].frame)
        throw std::invalid_argument("scenario: waypoints must have increasing frames");
      if (wp.w <= 0.0 || wp.h <= 0.0)
        throw std::invalid_argument("scenario: waypoint with non-positive size");
      if (wp.cx - wp.w / 2 < 0.0 || wp.cx + wp.w / 2 > width || wp.cy - wp.h / 2 < 0.0 ||
          wp.cy + wp.h / 2 > height)
        throw std::invalid_argument("scenario: waypoint box outside image bounds");
      if (wp.action >= n_actions)
        throw std::invalid_argument("scenario: action id outside vocabulary");
    }
  }
}

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  std::map<int, ScenarioAgent> agents;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "agent") {
      int idx = -1;
      ls >> idx;
      ScenarioAgent agent;
      std::string kv;
      while (ls >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw std::invalid_argument("scenario: bad agent attribute at line " +
                                      std::to_string(lineno));
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "class")
          agent.class_id = std::stoi(value);
        else if (key == "active")
          agent.active = std::stoi(value) != 0;
        else
          throw std::invalid_argument("scenario: unknown agent attribute '" + key + "'");
      }
      agents[idx] = agent;
    } else if (head == "traj") {
      int idx = -1, frame = 0;
      double cx, cy, w, h;
      std::string action_tok;
      if (!(ls >> idx >> frame >> cx >> cy >> w >> h >> action_tok))
        throw std::invalid_argument("scenario: bad traj row at line " + std::to_string(lineno));
      auto it = agents.find(idx);
      if (it == agents.end())
        throw std::invalid_argument("scenario: traj row for undeclared agent " +
                                    std::to_string(idx));
      it->second.waypoints.push_back({frame, cx, cy, w, h, parse_action_token(action_tok)});
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("scenario: line " + std::to_string(lineno) +
                                    " is not key=value or an agent/traj row");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key == "seed") sc.seed = std::stoull(value);
      else if (key == "duration") sc.duration = std::stoi(value);
      else if (key == "width") sc.width = std::stoi(value);
      else if (key == "height") sc.height = std::stoi(value);
      else if (key == "ego_dx") sc.ego_dx = std::stod(value);
      else if (key == "ego_dy") sc.ego_dy = std::stod(value);
      else if (key == "fps") sc.fps = std::stod(value);
      else if (key == "n_actions") sc.n_actions = std::stoi(value);
      else if (key == "inactive_class") sc.inactive_class = std::stoi(value);
      else if (key == "box_jitter_sigma") sc.noise.box_jitter_sigma = std::stod(value);
      else if (key == "miss_rate") sc.noise.miss_rate = std::stod(value);
      else if (key == "false_positive_rate") sc.noise.false_positive_rate = std::stod(value);
      else if (key == "nms_iou") sc.noise.nms_iou = std::stod(value);
      else throw std::invalid_argument("scenario: unknown key '" + key + "'");
    }
  }
  for (auto& [idx, agent] : agents) sc.agents.push_back(std::move(agent));
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("scenario: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

AgentPose agent_pose(const ScenarioAgent& agent, int frame) {
  AgentPose pose;
  const auto& wps = agent.waypoints;
  if (wps.empty() || frame < wps.front().frame || frame > wps.back().frame) return pose;
  std::size_t seg = 0;
  while (seg + 1 < wps.size() && wps[seg + 1].frame <= frame) ++seg;
  const AgentWaypoint& a = wps[seg];
  pose.present = true;
  pose.action = a.action;
  if (seg + 1 == wps.size() || wps[seg].frame == frame) {
    pose.box = box_from_center(a.cx, a.cy, a.w, a.h);
    return pose;
  }
  const AgentWaypoint& b = wps[seg + 1];
  const double t = static_cast<double>(frame - a.frame) / (b.frame - a.frame);
  pose.box = box_from_center(a.cx + (b.cx - a.cx) * t, a.cy + (b.cy - a.cy) * t,
                             a.w + (b.w - a.w) * t, a.h + (b.h - a.h) * t);
  return pose;
}

void action_color(int action, int n_actions, double& r, double& g, double& b) {
  if (action < 0) {
    r = g = b = 0.55;  // inactive / no action
    return;
  }
  const double hue = 360.0 * action / std::max(1, n_actions);
  hsv_to_rgb(hue, 0.85, 0.9, r, g, b);
}

GeneratedScenario generate(const Scenario& scenario) {
  scenario.validate();
  Rng rng(scenario.seed);
  GeneratedScenario out;
  const int width = scenario.width;
  const int height = scenario.height;

  // frames
  out.frames.reserve(scenario.duration);
  for (int f = 0; f < scenario.duration; ++f) {
    FeatureTensor img(1, 3, height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        img.at(0, 0, y, x) = 0.2 + 0.2 * x / std::max(1, width - 1);
        img.at(0, 1, y, x) = 0.2 + 0.2 * y / std::max(1, height - 1);
        img.at(0, 2, y, x) = 0.3;
      }
    for (const auto& agent : scenario.agents) {
      const AgentPose pose = agent_pose(agent, f);
      if (!pose.present) continue;
      double r, g, b;
      action_color(agent.active ? pose.action : -1, scenario.n_actions, r, g, b);
      int x0, x1, y0, y1;
      pixel_span(pose.box.x1, pose.box.x2, width, x0, x1);
      pixel_span(pose.box.y1, pose.box.y2, height, y0, y1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          img.at(0, 0, y, x) = r;
          img.at(0, 1, y, x) = g;
          img.at(0, 2, y, x) = b;
        }
    }
    out.frames.push_back(std::move(img));
  }

  // flows: background carries the negated ego translation; active agents
  // overwrite their box with the agent's apparent image motion; inactive
  // agents keep the background flow exactly.
  for (int f = 0; f + 1 < scenario.duration; ++f) {
    FlowField flow(height, width, -scenario.ego_dx, -scenario.ego_dy);
    for (const auto& agent : scenario.agents) {
      if (!agent.active) continue;
      const AgentPose now = agent_pose(agent, f);
      const AgentPose next = agent_pose(agent, f + 1);
      if (!now.present || !next.present) continue;
      const double du = next.box.cx() - now.box.cx();
      const double dv = next.box.cy() - now.box.cy();
      int x0, x1, y0, y1;
      pixel_span(now.box.x1, now.box.x2, width, x0, x1);
      pixel_span(now.box.y1, now.box.y2, height, y0, y1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          flow.u[flow.index(y, x)] = du;
          flow.v[flow.index(y, x)] = dv;
        }
    }
    out.flows.push_back(std::move(flow));
  }

  // detections with the noise model, then a low-threshold per-class NMS
  for (int f = 0; f < scenario.duration; ++f) {
    std::vector<Detection> frame_dets;
    for (std::size_t ai = 0; ai < scenario.agents.size(); ++ai) {
      const auto& agent = scenario.agents[ai];
      const AgentPose pose = agent_pose(agent, f);
      if (!pose.present) continue;
      if (scenario.noise.miss_rate > 0.0 && rng.uniform() < scenario.noise.miss_rate) continue;
      BoundingBox box = pose.box;
      if (scenario.noise.box_jitter_sigma > 0.0) {
        const double s = scenario.noise.box_jitter_sigma;
        box.x1 += rng.normal(0.0, s);
        box.y1 += rng.normal(0.0, s);
        box.x2 += rng.normal(0.0, s);
        box.y2 += rng.normal(0.0, s);
        box.x2 = std::max(box.x2, box.x1 + 0.5);
        box.y2 = std::max(box.y2, box.y1 + 0.5);
      }
      Detection det;
      det.class_id = agent.active ? agent.class_id : scenario.inactive_class;
      det.confidence = (agent.active ? 0.95 : 0.92) - 0.002 * static_cast<double>(ai);
      det.box = box;
      det.frame_index = f;
      det.timestamp = f / scenario.fps;
      frame_dets.push_back(det);
    }
    if (scenario.noise.false_positive_rate > 0.0 &&
        rng.uniform() < scenario.noise.false_positive_rate) {
      const double w = rng.uniform(6.0, 16.0);
      const double h = rng.uniform(6.0, 16.0);
      const double cx = rng.uniform(w / 2, width - w / 2);
      const double cy = rng.uniform(h / 2, height - h / 2);
      Detection det;
      det.class_id = scenario.agents.empty() ? 1 : scenario.agents.front().class_id;
      det.confidence = 0.5 + 0.3 * rng.uniform();
      det.box = box_from_center(cx, cy, w, h);
      det.frame_index = f;
      det.timestamp = f / scenario.fps;
      frame_dets.push_back(det);
    }
    // greedy confidence-ordered NMS per class (kept deliberately low)
    std::stable_sort(frame_dets.begin(), frame_dets.end(),
                     [](const Detection& a, const Detection& b) {
                       return a.confidence > b.confidence;
                     });
    std::vector<char> keep(frame_dets.size(), 1);
    for (std::size_t i = 0; i < frame_dets.size(); ++i) {
      if (!keep[i]) continue;
      for (std::size_t j = i + 1; j < frame_dets.size(); ++j) {
        if (!keep[j] || frame_dets[j].class_id != frame_dets[i].class_id) continue;
        if (iou(frame_dets[i].box, frame_dets[j].box) > scenario.noise.nms_iou) keep[j] = 0;
      }
    }
    for (std::size_t i = 0; i < frame_dets.size(); ++i)
      if (keep[i]) out.detections.push_back(frame_dets[i]);
  }

  // ground truth: per-frame action boxes, contiguous action runs, full tubes
  for (std::size_t ai = 0; ai < scenario.agents.size(); ++ai) {
    const auto& agent = scenario.agents[ai];
    Tubelet tube;
    tube.track_id = static_cast<int>(ai);
    tube.class_id = agent.class_id;
    tube.start_frame = 0;
    tube.boxes.resize(scenario.duration);
    tube.origins.assign(scenario.duration, SlotOrigin::Observed);

    ActionTrack run;
    bool in_run = false;
    auto flush_run = [&]() {
      if (in_run) out.gt_tracks.push_back(run);
      in_run = false;
    };
    for (int f = 0; f < scenario.duration; ++f) {
      const AgentPose pose = agent_pose(agent, f);
      if (pose.present) tube.boxes[f] = pose.box;
      const bool has_action = agent.active && pose.present && pose.action >= 0;
      if (has_action)
        out.gt_boxes.push_back({f, pose.action, 1.0, pose.box});
      if (has_action && in_run && run.class_id == pose.action) {
        run.boxes.emplace_back(pose.box);
        run.scores.push_back(1.0);
      } else {
        flush_run();
        if (has_action) {
          run = ActionTrack();
          run.class_id = pose.action;
          run.start_frame = f;
          run.track_id = static_cast<int>(ai);
          run.boxes = {pose.box};
          run.scores = {1.0};
          in_run = true;
        }
      }
    }
    flush_run();
    out.gt_tubes.push_back(std::move(tube));
  }

  return out;
}

}  // namespace ralacs
