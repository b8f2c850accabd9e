#pragma once

#include <cstdint>
#include <vector>

#include "ralacs/kernels.hpp"
#include "ralacs/tensor.hpp"
#include "ralacs/types.hpp"

namespace ralacs {

/// Multi-scale feature stack, finest level first; each following level has
/// floor-half the spatial size of the previous one, equal channel counts.
struct FeaturePyramid {
  std::vector<FeatureTensor> levels;

  int depth() const { return static_cast<int>(levels.size()); }
  void validate() const;
};

struct PseudoLabelRule {
  double conf_threshold = 0.9;
  double iou_threshold = 0.2;
  int relabel_class = 0;  // the "inactive agent" class
};

/// (h, s, v) -> (r, g, b), all in [0,1], hue in degrees [0,360).
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

/// Color-wheel encoding of a flow field: hue from atan2(v,u), saturation from
/// the per-field max-normalized magnitude, value 1. Output (1,3,H,W) in [0,1].
FeatureTensor flow_to_colorwheel(const FlowField& flow);

/// Summation-junction fusion of an RGB and a flow pyramid. The coarsest level
/// is the plain sum; every finer level additionally receives the 2x nearest
/// upsample of both coarser levels. Odd target sizes are reached by clamping
/// the upsample index (edge replication on the last row/column).
FeaturePyramid fuse_fpn(const FeaturePyramid& rgb, const FeaturePyramid& flow);

/// High-confidence detections that overlap no ground-truth box get relabeled
/// to the inactive class; everything else is dropped.
std::vector<Detection> generate_pseudo_labels(const std::vector<Detection>& pretrained_dets,
                                              const std::vector<Detection>& ground_truth,
                                              const PseudoLabelRule& rule);

/// Deterministic stand-in for a backbone: level i is the input average-pooled
/// by 2^i per axis and projected to `channels` with a seed-fixed random
/// zero-bias 1x1 projection. Same seed, same output.
FeaturePyramid synthetic_feature_provider(const FeatureTensor& image, int levels,
                                          int channels, std::uint64_t seed);

}  // namespace ralacs
