#pragma once

#include "ralacs/config.hpp"
#include "ralacs/eval.hpp"
#include "ralacs/interaction.hpp"
#include "ralacs/scenario.hpp"

namespace ralacs {

struct PipelineResult {
  std::vector<ActionTrack> tracks;         // trimmed action tracks
  std::vector<ScoredBox> frame_predictions;  // masked per-key-frame scored boxes
  EvalReport frame_report;                 // frame-mAP@0.5 over covered key frames
  EvalReport video_report;                 // video-mAP@0.2 over covered key frames
  int first_key_frame = 0;                 // evaluated key-frame range
  int last_key_frame = 0;
};

/// Builds training samples from the scenario's own ground-truth tubes
/// (classifier-ablation style: ground-truth boxes in, one-hot key-frame
/// action out) and trains the interaction head. Deterministic.
ModelWeights train_from_scenario(const Scenario& scenario, const PipelineConfig& cfg);

/// Full chain: render + flow -> synthetic features -> fusion -> detections ->
/// tracking -> sliding windows -> DROI -> HR2O -> classify -> mask/trim ->
/// evaluate against the scenario ground truth over the covered key frames.
/// Stage failures rethrow with a stage tag.
PipelineResult run_pipeline(const Scenario& scenario, const PipelineConfig& cfg,
                            const ModelWeights& weights);

}  // namespace ralacs
