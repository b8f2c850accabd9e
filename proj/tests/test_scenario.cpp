#include <doctest.h>

#include <cmath>

#include "ralacs/actions.hpp"
#include "ralacs/scenario.hpp"

using namespace ralacs;

namespace {

Scenario two_agent_scenario() {
  return parse_scenario(R"(
seed=21
duration=12
width=48
height=48
ego_dx=0.5
ego_dy=0
agent 0 class=1 active=1
traj 0 0 12 24 8 10 Wait2X
traj 0 11 30 24 8 10 XingLft
agent 1 class=2 active=0
traj 1 0 38 12 8 6 none
traj 1 11 33 12 8 6 none
)");
}

}  // namespace

TEST_CASE("scenario parsing reads keys, agents and waypoints") {
  const Scenario sc = two_agent_scenario();
  CHECK(sc.seed == 21);
  CHECK(sc.duration == 12);
  CHECK(sc.width == 48);
  REQUIRE(sc.agents.size() == 2);
  CHECK(sc.agents[0].active);
  CHECK(!sc.agents[1].active);
  CHECK(sc.agents[0].waypoints[0].action == kActionWait2X);
  CHECK(sc.agents[1].waypoints[0].action == -1);
}

TEST_CASE("scenario parsing rejects malformed input") {
  CHECK_THROWS(parse_scenario("bogus line without equals\n"));
  CHECK_THROWS(parse_scenario("unknown_key=3\n"));
  CHECK_THROWS(parse_scenario("traj 0 0 1 1 4 4 Mov\n"));  // undeclared agent
  CHECK_THROWS(parse_scenario(R"(
duration=4
width=32
height=32
agent 0 class=1 active=1
traj 0 0 2 2 8 8 Mov
)"));  // waypoint box leaves the image
}

TEST_CASE("agent_pose interpolates linearly between waypoints") {
  const Scenario sc = two_agent_scenario();
  const AgentPose start = agent_pose(sc.agents[0], 0);
  CHECK(start.present);
  CHECK(start.box.cx() == doctest::Approx(12.0));
  const AgentPose mid = agent_pose(sc.agents[0], 5);
  CHECK(mid.box.cx() == doctest::Approx(12.0 + (30.0 - 12.0) * 5.0 / 11.0));
  CHECK(!agent_pose(sc.agents[0], 12).present);
  CHECK(!agent_pose(sc.agents[0], -1).present);
}

TEST_CASE("generate: zero ego and a static inactive car yields identically zero flow") {
  const Scenario sc = parse_scenario(R"(
seed=3
duration=4
width=32
height=32
agent 0 class=2 active=0
traj 0 0 16 16 8 8 none
traj 0 3 16 16 8 8 none
)");
  const GeneratedScenario gen = generate(sc);
  for (const auto& flow : gen.flows) {
    for (double u : flow.u) CHECK(u == 0.0);
    for (double v : flow.v) CHECK(v == 0.0);
  }
}

TEST_CASE("generate: background flow is the negated ego translation") {
  Scenario sc = parse_scenario(R"(
seed=3
duration=3
width=32
height=32
ego_dx=2
ego_dy=0
)");
  const GeneratedScenario gen = generate(sc);
  REQUIRE(gen.flows.size() == 2);
  CHECK(gen.flows[0].u[gen.flows[0].index(5, 5)] == doctest::Approx(-2.0));
  CHECK(gen.flows[0].v[gen.flows[0].index(5, 5)] == doctest::Approx(0.0));
}

TEST_CASE("generate: inactive agents carry exactly the background flow") {
  const Scenario sc = two_agent_scenario();
  const GeneratedScenario gen = generate(sc);
  // inside the parked car's box: flow equals -ego exactly
  const AgentPose pose = agent_pose(sc.agents[1], 4);
  const int px = static_cast<int>(pose.box.cx());
  const int py = static_cast<int>(pose.box.cy());
  CHECK(gen.flows[4].u[gen.flows[4].index(py, px)] == doctest::Approx(-0.5));
  CHECK(gen.flows[4].v[gen.flows[4].index(py, px)] == doctest::Approx(0.0));
  // inside the active pedestrian's box: flow equals its own image motion
  const AgentPose ped_now = agent_pose(sc.agents[0], 4);
  const AgentPose ped_next = agent_pose(sc.agents[0], 5);
  const int ax = static_cast<int>(ped_now.box.cx());
  const int ay = static_cast<int>(ped_now.box.cy());
  CHECK(gen.flows[4].u[gen.flows[4].index(ay, ax)] ==
        doctest::Approx(ped_next.box.cx() - ped_now.box.cx()));
}

TEST_CASE("generate is bit-deterministic under the seed") {
  Scenario sc = two_agent_scenario();
  sc.noise.box_jitter_sigma = 0.5;
  sc.noise.miss_rate = 0.1;
  sc.noise.false_positive_rate = 0.2;
  const GeneratedScenario a = generate(sc);
  const GeneratedScenario b = generate(sc);
  REQUIRE(a.detections.size() == b.detections.size());
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    CHECK(a.detections[i].box == b.detections[i].box);
    CHECK(a.detections[i].confidence == b.detections[i].confidence);
  }
  for (std::size_t f = 0; f < a.frames.size(); ++f)
    CHECK(max_abs_diff(a.frames[f], b.frames[f]) == 0.0);
}

TEST_CASE("generate labels inactive agents with the inactive class") {
  const Scenario sc = two_agent_scenario();
  const GeneratedScenario gen = generate(sc);
  int active_count = 0, inactive_count = 0;
  for (const auto& det : gen.detections) {
    if (det.class_id == sc.inactive_class) ++inactive_count;
    else ++active_count;
  }
  CHECK(active_count == sc.duration);
  CHECK(inactive_count == sc.duration);
}

TEST_CASE("generate produces ground truth boxes, runs and tubes") {
  const Scenario sc = two_agent_scenario();
  const GeneratedScenario gen = generate(sc);
  CHECK(gen.gt_boxes.size() == static_cast<std::size_t>(sc.duration));  // one active agent
  REQUIRE(gen.gt_tracks.size() == 2);  // Wait2X run then XingLft run
  CHECK(gen.gt_tracks[0].class_id == kActionWait2X);
  CHECK(gen.gt_tracks[1].class_id == kActionXingLft);
  CHECK(gen.gt_tracks[1].start_frame == 11);
  REQUIRE(gen.gt_tubes.size() == 2);
  CHECK(gen.gt_tubes[0].boxes.size() == static_cast<std::size_t>(sc.duration));
}

TEST_CASE("noise model produces misses, jitter and false positives") {
  Scenario sc = two_agent_scenario();
  sc.duration = 12;
  sc.noise.box_jitter_sigma = 0.4;
  sc.noise.miss_rate = 0.3;
  sc.noise.false_positive_rate = 0.5;
  const GeneratedScenario gen = generate(sc);
  CHECK(gen.detections.size() != static_cast<std::size_t>(2 * sc.duration));
  bool jittered = false;
  for (const auto& det : gen.detections) {
    for (const auto& agent : sc.agents) {
      const AgentPose pose = agent_pose(agent, det.frame_index);
      if (pose.present && std::abs(det.box.x1 - pose.box.x1) > 1e-9 &&
          iou(det.box, pose.box) > 0.5)
        jittered = true;
    }
  }
  CHECK(jittered);
}

TEST_CASE("action colors are distinct across the vocabulary") {
  double r1, g1, b1, r2, g2, b2;
  for (int a = 0; a < 10; ++a)
    for (int b = a + 1; b < 10; ++b) {
      action_color(a, 10, r1, g1, b1);
      action_color(b, 10, r2, g2, b2);
      const double dist = std::abs(r1 - r2) + std::abs(g1 - g2) + std::abs(b1 - b2);
      CHECK(dist > 0.05);
    }
}
