#include <doctest.h>

#include "ralacs/pipeline.hpp"

using namespace ralacs;

namespace {

// small-scale settings so the unit suite stays fast
PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.clip_length = 8;
  cfg.slow_frames = 2;
  cfg.feature_levels = 2;
  cfg.feature_channels = 6;
  cfg.reduced_channels = 8;
  cfg.attention_dim = 8;
  cfg.roi_out = 5;
  cfg.train_epochs = 50;
  cfg.train_stride = 2;
  cfg.learning_rate = 0.02;
  cfg.dropout_rate = 0.0;
  return cfg;
}

Scenario small_scenario() {
  return parse_scenario(R"(
seed=11
duration=30
width=64
height=64
ego_dx=0.25
ego_dy=0
agent 0 class=1 active=1
traj 0 0 18 20 10 12 Wait2X
traj 0 29 40 20 10 12 Wait2X
agent 1 class=2 active=1
traj 1 0 44 46 12 10 MovTow
traj 1 29 22 46 12 10 MovTow
agent 2 class=2 active=0
traj 2 0 54 14 10 8 none
traj 2 29 47 14 10 8 none
)");
}

}  // namespace

TEST_CASE("train_from_scenario then run_pipeline reaches a high frame mAP") {
  const Scenario sc = small_scenario();
  const PipelineConfig cfg = small_config();
  const ModelWeights weights = train_from_scenario(sc, cfg);
  const PipelineResult result = run_pipeline(sc, cfg, weights);
  CHECK(result.frame_report.mean_ap >= 0.9);
  CHECK(result.video_report.mean_ap >= 0.5);
  CHECK(!result.tracks.empty());
  CHECK(result.first_key_frame == 4);
  CHECK(result.last_key_frame == 26);
}

TEST_CASE("run_pipeline is deterministic") {
  const Scenario sc = small_scenario();
  const PipelineConfig cfg = small_config();
  const ModelWeights weights = train_from_scenario(sc, cfg);
  const PipelineResult a = run_pipeline(sc, cfg, weights);
  const PipelineResult b = run_pipeline(sc, cfg, weights);
  CHECK(report_to_json(a.frame_report) == report_to_json(b.frame_report));
  CHECK(report_to_json(a.video_report) == report_to_json(b.video_report));
  REQUIRE(a.frame_predictions.size() == b.frame_predictions.size());
  for (std::size_t i = 0; i < a.frame_predictions.size(); ++i)
    CHECK(a.frame_predictions[i].score == b.frame_predictions[i].score);
}

TEST_CASE("a scenario with no active agents produces no tracks and an empty report") {
  const Scenario sc = parse_scenario(R"(
seed=2
duration=16
width=64
height=64
agent 0 class=2 active=0
traj 0 0 30 30 10 8 none
traj 0 15 30 30 10 8 none
)");
  PipelineConfig cfg = small_config();
  // weights trained elsewhere still apply; train on the richer scenario
  const ModelWeights weights = train_from_scenario(small_scenario(), cfg);
  const PipelineResult result = run_pipeline(sc, cfg, weights);
  CHECK(result.tracks.empty());
  CHECK(result.frame_predictions.empty());
  CHECK(result.frame_report.per_class.empty());
  CHECK(result.frame_report.mean_ap == 0.0);
}

TEST_CASE("the pipeline survives detection noise with reasonable accuracy") {
  Scenario sc = small_scenario();
  sc.noise.box_jitter_sigma = 0.3;
  sc.noise.miss_rate = 0.05;
  sc.noise.false_positive_rate = 0.1;
  const PipelineConfig cfg = small_config();
  // trained on the clean generator family, evaluated on the noisy stream
  const ModelWeights weights = train_from_scenario(small_scenario(), cfg);
  const PipelineResult result = run_pipeline(sc, cfg, weights);
  CHECK(result.frame_report.mean_ap >= 0.5);
}

TEST_CASE("train_from_scenario rejects stacked interaction layers") {
  PipelineConfig cfg = small_config();
  cfg.hr2o_depth = 2;
  CHECK_THROWS_AS(train_from_scenario(small_scenario(), cfg), std::runtime_error);
}

TEST_CASE("pipeline failures carry a stage tag") {
  Scenario sc = small_scenario();
  PipelineConfig cfg = small_config();
  cfg.clip_length = 64;  // longer than the scenario: training finds no clips
  cfg.slow_frames = 16;
  try {
    train_from_scenario(sc, cfg);
    FAIL("expected a stage-tagged error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("train_from_scenario") != std::string::npos);
  }
}
