#pragma once

#include <string>
#include <vector>

#include "ralacs/geometry.hpp"
#include "ralacs/postprocess.hpp"

namespace ralacs {

/// One scored (or ground-truth, score ignored) action box at a frame.
struct ScoredBox {
  int frame_index = 0;
  int class_id = 0;  // action id
  double score = 1.0;
  BoundingBox box;
};

std::string to_json_line(const ScoredBox& b, bool with_score);
ScoredBox scored_box_from_json(const std::string& line);
std::vector<ScoredBox> read_scored_boxes_jsonl(const std::string& path);
void write_scored_boxes_jsonl(const std::vector<ScoredBox>& boxes, const std::string& path,
                              bool with_score = true);

struct ClassAp {
  int class_id = 0;
  double ap = 0.0;
  int num_gt = 0;
  int num_pred = 0;
};

struct EvalReport {
  std::string mode;  // "frame" or "video"
  double iou_threshold = 0.5;
  std::vector<ClassAp> per_class;  // classes with >= 1 GT instance, ascending id
  double mean_ap = 0.0;            // 0.0 when no class has GT
};

std::string report_to_json(const EvalReport& r);
void write_report(const EvalReport& r, const std::string& path);

/// Per-class average precision with greedy score-ordered matching at
/// IoU >= iou_thr within the same frame; all-point PR interpolation; the mean
/// runs over classes with at least one GT instance.
EvalReport frame_map(const std::vector<ScoredBox>& predictions,
                     const std::vector<ScoredBox>& ground_truth, double iou_thr = 0.5);

/// Spatio-temporal tube IoU: mean per-frame spatial IoU over the union of the
/// two temporal extents (absent box counts 0).
double tube_iou(const ActionTrack& a, const ActionTrack& b);

/// Track-level AP at tube IoU >= tube_iou_thr; a track scores the mean of its
/// per-frame scores.
EvalReport video_map(const std::vector<ActionTrack>& predictions,
                     const std::vector<ActionTrack>& ground_truth,
                     double tube_iou_thr = 0.2);

}  // namespace ralacs
