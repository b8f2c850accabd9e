#pragma once

#include <cmath>
#include <stdexcept>

namespace ralacs {

/// Axis-aligned box in continuous pixel coordinates, origin top-left.
/// Area is (x2-x1)*(y2-y1); no +1 pixel correction.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  BoundingBox() = default;
  BoundingBox(double x1_, double y1_, double x2_, double y2_)
      : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {}

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x2 > x1 && y2 > y1;
  }

  void validate() const {
    if (!valid()) throw std::invalid_argument("BoundingBox: degenerate or non-finite box");
  }

  bool operator==(const BoundingBox& o) const {
    return x1 == o.x1 && y1 == o.y1 && x2 == o.x2 && y2 == o.y2;
  }
};

/// Intersection-over-union of two valid boxes; 0 when disjoint.
double iou(const BoundingBox& a, const BoundingBox& b);

BoundingBox box_from_center(double cx, double cy, double w, double h);

}  // namespace ralacs
