#include "ralacs/flow_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ralacs/geometry.hpp"
#include "ralacs/rng.hpp"

namespace ralacs {

void FeaturePyramid::validate() const {
  if (levels.empty()) throw std::invalid_argument("FeaturePyramid: no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    levels[i].validate();
    if (levels[i].c != levels[0].c)
      throw std::invalid_argument("FeaturePyramid: channel counts differ across levels");
    if (i > 0 && (levels[i].h != levels[i - 1].h / 2 || levels[i].w != levels[i - 1].w / 2))
      throw std::invalid_argument("FeaturePyramid: levels must halve spatially");
  }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = std::fmod(h, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0.0, g1 = 0.0, b1 = 0.0;
  if (hp < 1.0) { r1 = c; g1 = x; }
  else if (hp < 2.0) { r1 = x; g1 = c; }
  else if (hp < 3.0) { g1 = c; b1 = x; }
  else if (hp < 4.0) { g1 = x; b1 = c; }
  else if (hp < 5.0) { r1 = x; b1 = c; }
  else { r1 = c; b1 = x; }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

FeatureTensor flow_to_colorwheel(const FlowField& flow) {
  flow.validate();
  double max_mag = 0.0;
  for (std::size_t i = 0; i < flow.u.size(); ++i)
    max_mag = std::max(max_mag, std::hypot(flow.u[i], flow.v[i]));
  FeatureTensor out(1, 3, flow.h, flow.w);
  for (int y = 0; y < flow.h; ++y)
    for (int x = 0; x < flow.w; ++x) {
      const double u = flow.u[flow.index(y, x)];
      const double v = flow.v[flow.index(y, x)];
      const double mag = std::hypot(u, v);
      const double sat = max_mag > 0.0 ? mag / max_mag : 0.0;
      const double hue = std::atan2(v, u) * 180.0 / M_PI;
      double r, g, b;
      hsv_to_rgb(hue, sat, 1.0, r, g, b);
      out.at(0, 0, y, x) = r;
      out.at(0, 1, y, x) = g;
      out.at(0, 2, y, x) = b;
    }
  return out;
}

namespace {

// Nearest upsample by 2 onto an explicit target size; a one-off odd target
// row/column replicates the edge.
FeatureTensor upsample_to(const FeatureTensor& in, int target_h, int target_w) {
  FeatureTensor out(in.t, in.c, target_h, target_w);
  for (int t = 0; t < in.t; ++t)
    for (int c = 0; c < in.c; ++c)
      for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x)
          out.at(t, c, y, x) = in.at(t, c, std::min(y / 2, in.h - 1), std::min(x / 2, in.w - 1));
  return out;
}

}  // namespace

FeaturePyramid fuse_fpn(const FeaturePyramid& rgb, const FeaturePyramid& flow) {
  rgb.validate();
  flow.validate();
  if (rgb.depth() != flow.depth())
    throw std::invalid_argument("fuse_fpn: pyramid depth mismatch");
  for (int i = 0; i < rgb.depth(); ++i)
    if (!rgb.levels[i].same_shape(flow.levels[i]))
      throw std::invalid_argument("fuse_fpn: per-level shape mismatch");

  // Lists run fine -> coarse; the recurrence runs from the coarse end, so the
  // last list entry is the level without upsample terms.
  FeaturePyramid out;
  out.levels.resize(rgb.depth());
  const int last = rgb.depth() - 1;
  out.levels[last] = rgb.levels[last] + flow.levels[last];
  // pairwise grouping keeps the sum bit-symmetric in the two pyramids
  for (int k = last - 1; k >= 0; --k) {
    const FeatureTensor same_level = rgb.levels[k] + flow.levels[k];
    const FeatureTensor upsampled =
        upsample_to(rgb.levels[k + 1], same_level.h, same_level.w) +
        upsample_to(flow.levels[k + 1], same_level.h, same_level.w);
    out.levels[k] = same_level + upsampled;
  }
  return out;
}

std::vector<Detection> generate_pseudo_labels(const std::vector<Detection>& pretrained_dets,
                                              const std::vector<Detection>& ground_truth,
                                              const PseudoLabelRule& rule) {
  std::vector<Detection> out;
  for (const auto& det : pretrained_dets) {
    if (det.confidence < rule.conf_threshold) continue;
    double max_iou = 0.0;
    for (const auto& gt : ground_truth) max_iou = std::max(max_iou, iou(det.box, gt.box));
    if (max_iou >= rule.iou_threshold) continue;
    Detection relabeled = det;
    relabeled.class_id = rule.relabel_class;
    out.push_back(relabeled);
  }
  return out;
}

FeaturePyramid synthetic_feature_provider(const FeatureTensor& image, int levels,
                                          int channels, std::uint64_t seed) {
  image.validate();
  if (levels < 1) throw std::invalid_argument("synthetic_feature_provider: levels must be >= 1");
  if (channels < 1) throw std::invalid_argument("synthetic_feature_provider: channels must be >= 1");
  if (image.t != 1) throw std::invalid_argument("synthetic_feature_provider: expected T=1 image");
  const int min_dim = std::min(image.h, image.w);
  if (min_dim < (1 << levels))
    throw std::invalid_argument("synthetic_feature_provider: image smaller than 2^levels per axis");

  Rng rng(seed);
  FeaturePyramid pyr;
  for (int level = 1; level <= levels; ++level) {
    Conv1x1Weights proj(channels, image.c);  // zero bias
    for (double& v : proj.w) v = rng.normal() / std::sqrt(static_cast<double>(image.c));
    const FeatureTensor pooled = spatial_avg_pool(image, 1 << level);
    pyr.levels.push_back(conv1x1(pooled, proj));
  }
  return pyr;
}

}  // namespace ralacs
