#include "ralacs/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace ralacs {

FeatureTensor::FeatureTensor(int t_, int c_, int h_, int w_, double fill)
    : t(t_), c(c_), h(h_), w(w_) {
  if (t < 0 || c < 0 || h < 0 || w < 0)
    throw std::invalid_argument("FeatureTensor: negative dimension");
  data.assign(static_cast<std::size_t>(t) * c * h * w, fill);
}

void FeatureTensor::validate() const {
  const std::size_t expect = static_cast<std::size_t>(t) * c * h * w;
  if (data.size() != expect)
    throw std::invalid_argument("FeatureTensor: data length does not match dims");
  for (double v : data)
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureTensor: non-finite value");
}

FeatureTensor FeatureTensor::slice_t(int ti) const {
  if (ti < 0 || ti >= t) throw std::invalid_argument("FeatureTensor: time index out of range");
  FeatureTensor out(1, c, h, w);
  const std::size_t n = static_cast<std::size_t>(c) * h * w;
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(n) * ti,
            data.begin() + static_cast<std::ptrdiff_t>(n) * (ti + 1), out.data.begin());
  return out;
}

FeatureTensor operator+(const FeatureTensor& a, const FeatureTensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("tensor add: shape mismatch");
  FeatureTensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

double max_abs_diff(const FeatureTensor& a, const FeatureTensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace ralacs
