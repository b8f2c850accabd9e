#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ralacs/eval.hpp"
#include "ralacs/types.hpp"

namespace ralacs {

struct AgentWaypoint {
  int frame = 0;
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
  int action = -1;  // -1: no action
};

struct ScenarioAgent {
  int class_id = 0;
  bool active = true;
  std::vector<AgentWaypoint> waypoints;  // sorted by frame
};

struct NoiseModel {
  double box_jitter_sigma = 0.0;
  double miss_rate = 0.0;
  double false_positive_rate = 0.0;
  double nms_iou = 0.3;  // deliberately low to keep tracking candidates
};

/// Scripted synthetic scene: agents with image-space waypoint trajectories
/// (linearly interpolated between waypoints), a constant per-frame ego
/// translation, and a detection noise model.
struct Scenario {
  std::uint64_t seed = 0;
  int duration = 0;  // frames
  int width = 0, height = 0;
  double ego_dx = 0.0, ego_dy = 0.0;  // camera translation, pixels/frame
  double fps = 10.0;
  int n_actions = 10;
  int inactive_class = 0;
  NoiseModel noise;
  std::vector<ScenarioAgent> agents;

  void validate() const;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text);

/// Interpolated state of one agent at a frame; absent outside its waypoints.
struct AgentPose {
  bool present = false;
  BoundingBox box;
  int action = -1;
};

AgentPose agent_pose(const ScenarioAgent& agent, int frame);

struct GeneratedScenario {
  std::vector<FeatureTensor> frames;   // duration images (1,3,H,W)
  std::vector<FlowField> flows;        // duration-1; flows[f]: frame f -> f+1
  std::vector<Detection> detections;   // noisy; inactive agents carry inactive_class
  std::vector<ScoredBox> gt_boxes;     // per-frame action ground truth
  std::vector<ActionTrack> gt_tracks;  // contiguous per-agent action runs
  std::vector<Tubelet> gt_tubes;       // one full-extent tube per agent
};

/// Deterministic under the scenario seed. Background flow is the negated ego
/// translation; pixels inside an active agent's box move with the agent's
/// apparent image motion; inactive agents carry exactly the background flow.
GeneratedScenario generate(const Scenario& scenario);

/// Solid color for an action id, shared by the renderer and the toy trainer.
void action_color(int action, int n_actions, double& r, double& g, double& b);

}  // namespace ralacs
