#pragma once

#include <cstddef>
#include <vector>

namespace ralacs {

/// Dense rank-4 array, row-major (T, C, H, W). Values are kept in double
/// precision in memory; the on-disk container stores 32-bit floats.
struct FeatureTensor {
  int t = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> data;

  FeatureTensor() = default;
  FeatureTensor(int t_, int c_, int h_, int w_, double fill = 0.0);

  std::size_t size() const { return data.size(); }

  std::size_t index(int ti, int ci, int yi, int xi) const {
    return ((static_cast<std::size_t>(ti) * c + ci) * h + yi) * w + xi;
  }
  double& at(int ti, int ci, int yi, int xi) { return data[index(ti, ci, yi, xi)]; }
  double at(int ti, int ci, int yi, int xi) const { return data[index(ti, ci, yi, xi)]; }

  bool same_shape(const FeatureTensor& o) const {
    return t == o.t && c == o.c && h == o.h && w == o.w;
  }

  /// Throws if data length mismatches dims or any value is non-finite.
  void validate() const;

  /// Single time slice as a T=1 tensor.
  FeatureTensor slice_t(int ti) const;
};

FeatureTensor operator+(const FeatureTensor& a, const FeatureTensor& b);

double max_abs_diff(const FeatureTensor& a, const FeatureTensor& b);

}  // namespace ralacs
