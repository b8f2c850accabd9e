#pragma once

#include <vector>

#include "ralacs/geometry.hpp"
#include "ralacs/tensor.hpp"
#include "ralacs/types.hpp"

namespace ralacs {

struct RoiAlignSpec {
  int out_h = 7;
  int out_w = 7;
  int samples_per_bin = 2;       // per axis
  double coordinate_offset = 0.0;  // -0.5 selects the half-pixel-aligned variant
};

/// Two temporal rates over the same clip: T_fast = alpha * T_slow for an
/// integer alpha; spatial dims equal, channel counts may differ.
struct TwoRateFeatures {
  FeatureTensor slow;
  FeatureTensor fast;

  int alpha() const { return fast.t / slow.t; }
  void validate() const;
};

/// Averages samples_per_bin^2 regularly spaced bilinear samples per output
/// bin. The box is in feature-map coordinates; callers scale from image
/// coordinates.
FeatureTensor roi_align(const FeatureTensor& feat, const BoundingBox& box,
                        const RoiAlignSpec& spec);

/// Key-frame baseline: temporally pool each pathway, align both with the
/// key-frame box, concatenate channels fast-then-slow.
FeatureTensor keyframe_align(const TwoRateFeatures& feats, const BoundingBox& key_box,
                             const RoiAlignSpec& spec);

/// Fast temporal indices at which the slow pathway is aligned: those with
/// (idx+1) divisible by alpha.
std::vector<int> slow_align_indices(int alpha, int t_fast);

/// Dynamic ROI alignment: aligns each frame's box against that frame's
/// feature slice (slow slices at the divisible indices), pools each pathway
/// over time, concatenates channels fast-then-slow.
///
/// fast_index_of_slot maps tubelet slots to fast temporal indices (-1 skips a
/// slot); slots with absent boxes are skipped in both pathways.
FeatureTensor droi_align(const TwoRateFeatures& feats, const Tubelet& tube,
                         const std::vector<int>& fast_index_of_slot,
                         const RoiAlignSpec& spec);

}  // namespace ralacs
