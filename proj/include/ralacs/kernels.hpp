#pragma once

#include <vector>

#include "ralacs/rng.hpp"
#include "ralacs/tensor.hpp"

namespace ralacs {

/// 1x1 spatial convolution weights: w is C_out x C_in row-major.
struct Conv1x1Weights {
  int c_out = 0;
  int c_in = 0;
  std::vector<double> w;
  std::vector<double> b;

  Conv1x1Weights() = default;
  Conv1x1Weights(int c_out_, int c_in_);
  static Conv1x1Weights identity(int c);

  double& at(int co, int ci) { return w[static_cast<std::size_t>(co) * c_in + ci]; }
  double at(int co, int ci) const { return w[static_cast<std::size_t>(co) * c_in + ci]; }
  void validate() const;
};

/// Bilinear interpolation of the four integer-grid neighbours of (x, y) on a
/// T=1 tensor. Neighbours outside [0,W-1]x[0,H-1] contribute value 0.
double bilinear_sample(const FeatureTensor& feat, double x, double y, int channel);

/// Nearest-neighbour 2x upsampling: out[..,y,x] = in[..,y/2,x/2].
FeatureTensor upsample_nearest_2x(const FeatureTensor& feat);

FeatureTensor conv1x1(const FeatureTensor& feat, const Conv1x1Weights& w);

/// Max-shifted softmax; output sums to 1. Empty input is an error.
std::vector<double> softmax(const std::vector<double>& v);

/// Normalizes over the channel dimension at each (t, y, x); population
/// variance; constant gain/bias (1, 0 unless configured otherwise).
FeatureTensor layer_norm(const FeatureTensor& feat, double eps = 1e-5,
                         double gain = 1.0, double bias = 0.0);

/// Elementwise mean of same-shaped T=1 tensors. Empty list is an error.
FeatureTensor temporal_avg_pool(const std::vector<FeatureTensor>& feats);

/// Mean over the T axis of one tensor, producing T=1.
FeatureTensor temporal_avg_pool(const FeatureTensor& feat);

/// Non-overlapping block average pooling; output dims floor(h/block) etc.
FeatureTensor spatial_avg_pool(const FeatureTensor& feat, int block);

/// Average pooling to an exact output size (bins partition the input evenly).
FeatureTensor adaptive_spatial_avg_pool(const FeatureTensor& feat, int out_h, int out_w);

/// Inverted-scaling Bernoulli dropout: entries survive with probability
/// keep_prob and are scaled by 1/keep_prob. keep_prob = 1 is the identity.
/// When mask_out is non-null it receives the applied multiplier per element.
FeatureTensor dropout(const FeatureTensor& feat, double keep_prob, Rng& rng,
                      std::vector<double>* mask_out = nullptr);

FeatureTensor relu(const FeatureTensor& feat);

/// Channel-sliced concatenation along C (same T,H,W).
FeatureTensor concat_channels(const FeatureTensor& a, const FeatureTensor& b);

}  // namespace ralacs
