#include "ralacs/geometry.hpp"

#include <algorithm>

namespace ralacs {

double iou(const BoundingBox& a, const BoundingBox& b) {
  a.validate();
  b.validate();
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

BoundingBox box_from_center(double cx, double cy, double w, double h) {
  return BoundingBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
}

}  // namespace ralacs
