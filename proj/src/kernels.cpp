#include "ralacs/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ralacs {

Conv1x1Weights::Conv1x1Weights(int c_out_, int c_in_) : c_out(c_out_), c_in(c_in_) {
  if (c_out < 1 || c_in < 1) throw std::invalid_argument("Conv1x1Weights: bad shape");
  w.assign(static_cast<std::size_t>(c_out) * c_in, 0.0);
  b.assign(c_out, 0.0);
}

Conv1x1Weights Conv1x1Weights::identity(int c) {
  Conv1x1Weights out(c, c);
  for (int i = 0; i < c; ++i) out.at(i, i) = 1.0;
  return out;
}

void Conv1x1Weights::validate() const {
  if (w.size() != static_cast<std::size_t>(c_out) * c_in || b.size() != static_cast<std::size_t>(c_out))
    throw std::invalid_argument("Conv1x1Weights: inconsistent shapes");
  for (double v : w)
    if (!std::isfinite(v)) throw std::invalid_argument("Conv1x1Weights: non-finite weight");
  for (double v : b)
    if (!std::isfinite(v)) throw std::invalid_argument("Conv1x1Weights: non-finite bias");
}

double bilinear_sample(const FeatureTensor& feat, double x, double y, int channel) {
  if (feat.t != 1) throw std::invalid_argument("bilinear_sample: expected T=1 tensor");
  if (channel < 0 || channel >= feat.c)
    throw std::invalid_argument("bilinear_sample: channel out of range");
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  auto value = [&](int yy, int xx) -> double {
    if (xx < 0 || xx >= feat.w || yy < 0 || yy >= feat.h) return 0.0;
    return feat.at(0, channel, yy, xx);
  };
  return value(y0, x0) * (1.0 - fx) * (1.0 - fy) + value(y0, x0 + 1) * fx * (1.0 - fy) +
         value(y0 + 1, x0) * (1.0 - fx) * fy + value(y0 + 1, x0 + 1) * fx * fy;
}

FeatureTensor upsample_nearest_2x(const FeatureTensor& feat) {
  FeatureTensor out(feat.t, feat.c, feat.h * 2, feat.w * 2);
  for (int t = 0; t < feat.t; ++t)
    for (int c = 0; c < feat.c; ++c)
      for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
          out.at(t, c, y, x) = feat.at(t, c, y / 2, x / 2);
  return out;
}

FeatureTensor conv1x1(const FeatureTensor& feat, const Conv1x1Weights& w) {
  if (feat.c != w.c_in) throw std::invalid_argument("conv1x1: channel count mismatch");
  FeatureTensor out(feat.t, w.c_out, feat.h, feat.w);
  for (int t = 0; t < feat.t; ++t)
    for (int y = 0; y < feat.h; ++y)
      for (int x = 0; x < feat.w; ++x)
        for (int co = 0; co < w.c_out; ++co) {
          double acc = w.b[co];
          for (int ci = 0; ci < w.c_in; ++ci) acc += w.at(co, ci) * feat.at(t, ci, y, x);
          out.at(t, co, y, x) = acc;
        }
  return out;
}

std::vector<double> softmax(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("softmax: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& o : out) o /= sum;
  return out;
}

FeatureTensor layer_norm(const FeatureTensor& feat, double eps, double gain, double bias) {
  FeatureTensor out(feat.t, feat.c, feat.h, feat.w);
  for (int t = 0; t < feat.t; ++t)
    for (int y = 0; y < feat.h; ++y)
      for (int x = 0; x < feat.w; ++x) {
        double mean = 0.0;
        for (int c = 0; c < feat.c; ++c) mean += feat.at(t, c, y, x);
        mean /= feat.c;
        double var = 0.0;
        for (int c = 0; c < feat.c; ++c) {
          const double d = feat.at(t, c, y, x) - mean;
          var += d * d;
        }
        var /= feat.c;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int c = 0; c < feat.c; ++c)
          out.at(t, c, y, x) = gain * (feat.at(t, c, y, x) - mean) * inv + bias;
      }
  return out;
}

FeatureTensor temporal_avg_pool(const std::vector<FeatureTensor>& feats) {
  if (feats.empty()) throw std::invalid_argument("temporal_avg_pool: empty list");
  for (const auto& f : feats) {
    if (f.t != 1) throw std::invalid_argument("temporal_avg_pool: expected T=1 tensors");
    if (!f.same_shape(feats.front()))
      throw std::invalid_argument("temporal_avg_pool: shape mismatch");
  }
  FeatureTensor out = feats.front();
  for (std::size_t i = 1; i < feats.size(); ++i)
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += feats[i].data[k];
  const double inv = 1.0 / static_cast<double>(feats.size());
  for (double& v : out.data) v *= inv;
  return out;
}

FeatureTensor temporal_avg_pool(const FeatureTensor& feat) {
  if (feat.t < 1) throw std::invalid_argument("temporal_avg_pool: empty tensor");
  FeatureTensor out(1, feat.c, feat.h, feat.w);
  for (int t = 0; t < feat.t; ++t)
    for (int c = 0; c < feat.c; ++c)
      for (int y = 0; y < feat.h; ++y)
        for (int x = 0; x < feat.w; ++x) out.at(0, c, y, x) += feat.at(t, c, y, x);
  const double inv = 1.0 / feat.t;
  for (double& v : out.data) v *= inv;
  return out;
}

FeatureTensor spatial_avg_pool(const FeatureTensor& feat, int block) {
  if (block < 1) throw std::invalid_argument("spatial_avg_pool: block must be >= 1");
  const int oh = feat.h / block;
  const int ow = feat.w / block;
  if (oh < 1 || ow < 1) throw std::invalid_argument("spatial_avg_pool: input smaller than block");
  FeatureTensor out(feat.t, feat.c, oh, ow);
  const double inv = 1.0 / (static_cast<double>(block) * block);
  for (int t = 0; t < feat.t; ++t)
    for (int c = 0; c < feat.c; ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < block; ++dy)
            for (int dx = 0; dx < block; ++dx)
              acc += feat.at(t, c, y * block + dy, x * block + dx);
          out.at(t, c, y, x) = acc * inv;
        }
  return out;
}

FeatureTensor adaptive_spatial_avg_pool(const FeatureTensor& feat, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("adaptive_spatial_avg_pool: bad output size");
  FeatureTensor out(feat.t, feat.c, out_h, out_w);
  for (int t = 0; t < feat.t; ++t)
    for (int c = 0; c < feat.c; ++c)
      for (int y = 0; y < out_h; ++y) {
        const int y0 = (y * feat.h) / out_h;
        const int y1 = std::max(y0 + 1, ((y + 1) * feat.h) / out_h);
        for (int x = 0; x < out_w; ++x) {
          const int x0 = (x * feat.w) / out_w;
          const int x1 = std::max(x0 + 1, ((x + 1) * feat.w) / out_w);
          double acc = 0.0;
          for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx) acc += feat.at(t, c, yy, xx);
          out.at(t, c, y, x) = acc / (static_cast<double>(y1 - y0) * (x1 - x0));
        }
      }
  return out;
}

FeatureTensor dropout(const FeatureTensor& feat, double keep_prob, Rng& rng,
                      std::vector<double>* mask_out) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw std::invalid_argument("dropout: keep_prob outside (0,1]");
  FeatureTensor out = feat;
  if (mask_out) mask_out->assign(feat.data.size(), 1.0);
  if (keep_prob == 1.0) return out;
  const double scale = 1.0 / keep_prob;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double m = rng.uniform() < keep_prob ? scale : 0.0;
    out.data[i] *= m;
    if (mask_out) (*mask_out)[i] = m;
  }
  return out;
}

FeatureTensor relu(const FeatureTensor& feat) {
  FeatureTensor out = feat;
  for (double& v : out.data) v = std::max(0.0, v);
  return out;
}

FeatureTensor concat_channels(const FeatureTensor& a, const FeatureTensor& b) {
  if (a.t != b.t || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("concat_channels: spatial/temporal mismatch");
  FeatureTensor out(a.t, a.c + b.c, a.h, a.w);
  for (int t = 0; t < a.t; ++t) {
    for (int c = 0; c < a.c; ++c)
      for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) out.at(t, c, y, x) = a.at(t, c, y, x);
    for (int c = 0; c < b.c; ++c)
      for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) out.at(t, a.c + c, y, x) = b.at(t, c, y, x);
  }
  return out;
}

}  // namespace ralacs
