#include "ralacs/droi_align.hpp"

#include <stdexcept>

#include "ralacs/kernels.hpp"

namespace ralacs {

void TwoRateFeatures::validate() const {
  slow.validate();
  fast.validate();
  if (slow.t < 1 || fast.t < 1) throw std::invalid_argument("TwoRateFeatures: empty pathway");
  if (fast.t % slow.t != 0)
    throw std::invalid_argument("TwoRateFeatures: fast length must be a multiple of slow length");
  if (slow.h != fast.h || slow.w != fast.w)
    throw std::invalid_argument("TwoRateFeatures: spatial dims differ between pathways");
}

FeatureTensor roi_align(const FeatureTensor& feat, const BoundingBox& box,
                        const RoiAlignSpec& spec) {
  if (feat.t != 1) throw std::invalid_argument("roi_align: expected T=1 tensor");
  if (spec.out_h < 1 || spec.out_w < 1 || spec.samples_per_bin < 1)
    throw std::invalid_argument("roi_align: bad spec");
  box.validate();
  if (box.area() < 1e-6) throw std::invalid_argument("roi_align: degenerate box");

  const double bin_w = box.width() / spec.out_w;
  const double bin_h = box.height() / spec.out_h;
  const int spb = spec.samples_per_bin;
  const double inv_count = 1.0 / (static_cast<double>(spb) * spb);

  FeatureTensor out(1, feat.c, spec.out_h, spec.out_w);
  for (int c = 0; c < feat.c; ++c)
    for (int by = 0; by < spec.out_h; ++by)
      for (int bx = 0; bx < spec.out_w; ++bx) {
        double acc = 0.0;
        for (int sy = 0; sy < spb; ++sy)
          for (int sx = 0; sx < spb; ++sx) {
            const double x = box.x1 + bin_w * (bx + (sx + 0.5) / spb) + spec.coordinate_offset;
            const double y = box.y1 + bin_h * (by + (sy + 0.5) / spb) + spec.coordinate_offset;
            acc += bilinear_sample(feat, x, y, c);
          }
        out.at(0, c, by, bx) = acc * inv_count;
      }
  return out;
}

FeatureTensor keyframe_align(const TwoRateFeatures& feats, const BoundingBox& key_box,
                             const RoiAlignSpec& spec) {
  feats.validate();
  const FeatureTensor fast_pooled = temporal_avg_pool(feats.fast);
  const FeatureTensor slow_pooled = temporal_avg_pool(feats.slow);
  return concat_channels(roi_align(fast_pooled, key_box, spec),
                         roi_align(slow_pooled, key_box, spec));
}

std::vector<int> slow_align_indices(int alpha, int t_fast) {
  if (alpha < 1) throw std::invalid_argument("slow_align_indices: alpha must be >= 1");
  std::vector<int> out;
  for (int idx = 0; idx < t_fast; ++idx)
    if ((idx + 1) % alpha == 0) out.push_back(idx);
  return out;
}

FeatureTensor droi_align(const TwoRateFeatures& feats, const Tubelet& tube,
                         const std::vector<int>& fast_index_of_slot,
                         const RoiAlignSpec& spec) {
  feats.validate();
  tube.validate();
  if (fast_index_of_slot.size() != tube.boxes.size())
    throw std::invalid_argument("droi_align: slot mapping length mismatch");
  const int alpha = feats.alpha();

  // reverse map: fast temporal index -> tubelet slot
  std::vector<int> slot_of_fast(feats.fast.t, -1);
  for (std::size_t slot = 0; slot < fast_index_of_slot.size(); ++slot) {
    const int idx = fast_index_of_slot[slot];
    if (idx < 0) continue;
    if (idx >= feats.fast.t)
      throw std::invalid_argument("droi_align: fast index out of range");
    slot_of_fast[idx] = static_cast<int>(slot);
  }

  std::vector<FeatureTensor> fast_rois;
  std::vector<FeatureTensor> slow_rois;
  for (int idx = 0; idx < feats.fast.t; ++idx) {
    const int slot = slot_of_fast[idx];
    if (slot < 0 || !tube.boxes[slot]) continue;  // missing box: skip both pathways
    const BoundingBox& box = *tube.boxes[slot];
    fast_rois.push_back(roi_align(feats.fast.slice_t(idx), box, spec));
    if ((idx + 1) % alpha == 0)
      slow_rois.push_back(roi_align(feats.slow.slice_t((idx + 1) / alpha - 1), box, spec));
  }
  if (fast_rois.empty()) throw std::invalid_argument("droi_align: tube has no usable box");
  if (slow_rois.empty())
    throw std::invalid_argument("droi_align: no box at any slow-aligned index");

  return concat_channels(temporal_avg_pool(fast_rois), temporal_avg_pool(slow_rois));
}

}  // namespace ralacs
