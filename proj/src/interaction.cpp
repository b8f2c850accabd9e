#include "ralacs/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ralacs/io.hpp"
#include "ralacs/rng.hpp"

namespace ralacs {

namespace {

double clamp_prob(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// loss and d(loss)/d(logit) of one alpha-balanced focal term.
void focal_term(double p, int target, double gamma, double alpha, double& loss,
                double& dlogit) {
  const double pt = clamp_prob(target == 1 ? p : 1.0 - p);
  const double at = target == 1 ? alpha : 1.0 - alpha;
  const double sgn = target == 1 ? 1.0 : -1.0;
  const double one_minus = 1.0 - pt;
  loss = -at * std::pow(one_minus, gamma) * std::log(pt);
  dlogit = sgn * at *
           (gamma * pt * std::pow(one_minus, gamma) * std::log(pt) -
            std::pow(one_minus, gamma + 1.0));
}

}  // namespace

void Hr2oWeights::validate() const {
  w_q.validate();
  w_k.validate();
  w_v.validate();
  w_out.validate();
  if (d < 1) throw std::invalid_argument("Hr2oWeights: d must be >= 1");
  if (w_q.c_out != d || w_k.c_out != d || w_v.c_out != d)
    throw std::invalid_argument("Hr2oWeights: embedding dims disagree with d");
  if (w_q.c_in != w_k.c_in || w_q.c_in != w_v.c_in)
    throw std::invalid_argument("Hr2oWeights: Q/K/V input dims disagree");
  if (w_out.c_in != d || w_out.c_out != w_q.c_in)
    throw std::invalid_argument("Hr2oWeights: output conv must map d back to C");
}

void HeadWeights::validate() const {
  if (n_actions < 1 || in_dim < 1) throw std::invalid_argument("HeadWeights: bad shape");
  if (w.size() != static_cast<std::size_t>(n_actions) * in_dim ||
      b.size() != static_cast<std::size_t>(n_actions))
    throw std::invalid_argument("HeadWeights: inconsistent shapes");
}

void ModelWeights::validate() const {
  reduce.validate();
  hr2o.validate();
  head.validate();
  if (hr2o.w_q.c_in != reduce.c_out)
    throw std::invalid_argument("ModelWeights: HR2O input dim disagrees with reduce output");
  if (head.in_dim % reduce.c_out != 0)
    throw std::invalid_argument("ModelWeights: head input not a multiple of channels");
}

FeatureTensor agent_context_reduce(const FeatureTensor& agent_roi,
                                   const FeatureTensor& clip_context,
                                   const Conv1x1Weights& w_reduce) {
  if (agent_roi.t != 1 || clip_context.t != 1)
    throw std::invalid_argument("agent_context_reduce: expected T=1 tensors");
  if (agent_roi.h != clip_context.h || agent_roi.w != clip_context.w)
    throw std::invalid_argument("agent_context_reduce: spatial dims mismatch");
  return conv1x1(concat_channels(agent_roi, clip_context), w_reduce);
}

std::vector<FeatureTensor> hr2o_forward(const std::vector<AgentFeature>& agents,
                                        const Hr2oWeights& w, double dropout_keep,
                                        std::uint64_t rng_seed, double layer_norm_eps,
                                        double layer_norm_gain, double layer_norm_bias) {
  if (agents.empty()) throw std::invalid_argument("hr2o_forward: empty agent list");
  w.validate();
  const int n = static_cast<int>(agents.size());
  for (const auto& a : agents) {
    if (a.feat.t != 1) throw std::invalid_argument("hr2o_forward: expected T=1 agent maps");
    if (!a.feat.same_shape(agents.front().feat))
      throw std::invalid_argument("hr2o_forward: agent map shapes differ");
  }
  const int hh = agents.front().feat.h;
  const int ww = agents.front().feat.w;
  const int d = w.d;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<FeatureTensor> q(n), k(n), v(n);
  for (int i = 0; i < n; ++i) {
    q[i] = conv1x1(agents[i].feat, w.w_q);
    k[i] = conv1x1(agents[i].feat, w.w_k);
    v[i] = conv1x1(agents[i].feat, w.w_v);
  }

  Rng rng(rng_seed);
  std::vector<FeatureTensor> out(n);
  std::vector<FeatureTensor> h_tilde(n, FeatureTensor(1, d, hh, ww));
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < hh; ++y)
      for (int x = 0; x < ww; ++x) {
        std::vector<double> logits(n);
        for (int j = 0; j < n; ++j) {
          double dot = 0.0;
          for (int c = 0; c < d; ++c) dot += q[i].at(0, c, y, x) * k[j].at(0, c, y, x);
          logits[j] = dot * scale;
        }
        const std::vector<double> att = softmax(logits);
        for (int c = 0; c < d; ++c) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += att[j] * v[j].at(0, c, y, x);
          h_tilde[i].at(0, c, y, x) = acc;
        }
      }
  }
  for (int i = 0; i < n; ++i) {
    const FeatureTensor normed =
        layer_norm(h_tilde[i], layer_norm_eps, layer_norm_gain, layer_norm_bias);
    const FeatureTensor h = dropout(conv1x1(relu(normed), w.w_out), dropout_keep, rng);
    out[i] = agents[i].feat + h;
  }
  return out;
}

ActionScores classify(const FeatureTensor& agent_out, const HeadWeights& w, int track_id,
                      int key_frame_index) {
  w.validate();
  if (agent_out.size() != static_cast<std::size_t>(w.in_dim))
    throw std::invalid_argument("classify: feature size disagrees with head input dim");
  ActionScores scores;
  scores.track_id = track_id;
  scores.key_frame_index = key_frame_index;
  scores.scores.resize(w.n_actions);
  for (int a = 0; a < w.n_actions; ++a) {
    double z = w.b[a];
    const double* row = w.w.data() + static_cast<std::size_t>(a) * w.in_dim;
    for (int i = 0; i < w.in_dim; ++i) z += row[i] * agent_out.data[i];
    scores.scores[a] = sigmoid(z);
  }
  return scores;
}

std::pair<double, std::vector<double>> focal_loss(const ActionScores& scores,
                                                  const std::vector<int>& targets,
                                                  const FocalLossSpec& spec) {
  if (scores.scores.size() != targets.size())
    throw std::invalid_argument("focal_loss: scores/targets length mismatch");
  double total = 0.0;
  std::vector<double> grad(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != 0 && targets[i] != 1)
      throw std::invalid_argument("focal_loss: target not in {0,1}");
    double loss, dlogit;
    focal_term(scores.scores[i], targets[i], spec.gamma, spec.alpha, loss, dlogit);
    total += loss;
    grad[i] = dlogit;
  }
  return {total, grad};
}

// ---- taped forward / backward ----------------------------------------------

struct AgentTape {
  FeatureTensor x;         // concat(agent_roi, context)
  FeatureTensor f;         // reduced features
  FeatureTensor q, k, v;
  FeatureTensor h_tilde;
  FeatureTensor ln_hat;    // normalized pre-affine
  FeatureTensor relu_out;
  std::vector<double> ln_inv_std;  // per position
  std::vector<double> dropout_mask;
  FeatureTensor f_prime;
  std::vector<double> probs;
  std::vector<int> targets;
};

struct ForwardTape {
  std::vector<AgentTape> agents;
  std::vector<std::vector<double>> att;  // per agent i: pos-major rows of N
  int n = 0, d = 0, c = 0, hh = 0, ww = 0;
  bool attention_enabled = true;
  double ln_gain = 1.0;
  FocalLossSpec focal;
  double inv_n = 1.0;
};

ForwardTape* new_tape() { return new ForwardTape(); }
void free_tape(ForwardTape* tape) { delete tape; }

double model_forward(const ModelWeights& w, const ToySample& sample, const ModelConfig& cfg,
                     std::uint64_t dropout_seed, std::vector<std::vector<double>>* scores_out,
                     ForwardTape* tape) {
  w.validate();
  const int n = static_cast<int>(sample.agent_rois.size());
  if (n == 0) throw std::invalid_argument("model_forward: sample has no agents");
  const int d = w.hr2o.d;
  const int c = w.reduce.c_out;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<AgentTape> at(n);
  for (int i = 0; i < n; ++i) {
    at[i].x = concat_channels(sample.agent_rois[i], sample.context);
    at[i].f = conv1x1(at[i].x, w.reduce);
  }
  const int hh = at[0].f.h;
  const int ww = at[0].f.w;
  const int n_pos = hh * ww;

  std::vector<std::vector<double>> att(n);
  Rng rng(dropout_seed);
  if (cfg.attention_enabled) {
    for (int i = 0; i < n; ++i) {
      at[i].q = conv1x1(at[i].f, w.hr2o.w_q);
      at[i].k = conv1x1(at[i].f, w.hr2o.w_k);
      at[i].v = conv1x1(at[i].f, w.hr2o.w_v);
      at[i].h_tilde = FeatureTensor(1, d, hh, ww);
      att[i].assign(static_cast<std::size_t>(n_pos) * n, 0.0);
    }
    for (int i = 0; i < n; ++i)
      for (int y = 0; y < hh; ++y)
        for (int x = 0; x < ww; ++x) {
          const int pos = y * ww + x;
          std::vector<double> logits(n);
          for (int j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int cc = 0; cc < d; ++cc)
              dot += at[i].q.at(0, cc, y, x) * at[j].k.at(0, cc, y, x);
            logits[j] = dot * scale;
          }
          const std::vector<double> row = softmax(logits);
          for (int j = 0; j < n; ++j) att[i][static_cast<std::size_t>(pos) * n + j] = row[j];
          for (int cc = 0; cc < d; ++cc) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += row[j] * at[j].v.at(0, cc, y, x);
            at[i].h_tilde.at(0, cc, y, x) = acc;
          }
        }
    for (int i = 0; i < n; ++i) {
      // layer norm over channels with recorded statistics
      at[i].ln_hat = FeatureTensor(1, d, hh, ww);
      at[i].ln_inv_std.assign(n_pos, 0.0);
      FeatureTensor normed(1, d, hh, ww);
      for (int y = 0; y < hh; ++y)
        for (int x = 0; x < ww; ++x) {
          double mean = 0.0;
          for (int cc = 0; cc < d; ++cc) mean += at[i].h_tilde.at(0, cc, y, x);
          mean /= d;
          double var = 0.0;
          for (int cc = 0; cc < d; ++cc) {
            const double diff = at[i].h_tilde.at(0, cc, y, x) - mean;
            var += diff * diff;
          }
          var /= d;
          const double inv = 1.0 / std::sqrt(var + cfg.layer_norm_eps);
          at[i].ln_inv_std[y * ww + x] = inv;
          for (int cc = 0; cc < d; ++cc) {
            const double hat = (at[i].h_tilde.at(0, cc, y, x) - mean) * inv;
            at[i].ln_hat.at(0, cc, y, x) = hat;
            normed.at(0, cc, y, x) = cfg.layer_norm_gain * hat + cfg.layer_norm_bias;
          }
        }
      at[i].relu_out = relu(normed);
      const FeatureTensor conv_out = conv1x1(at[i].relu_out, w.hr2o.w_out);
      const FeatureTensor h = dropout(conv_out, cfg.dropout_keep, rng, &at[i].dropout_mask);
      at[i].f_prime = at[i].f + h;
    }
  } else {
    for (int i = 0; i < n; ++i) at[i].f_prime = at[i].f;
  }

  double total = 0.0;
  const double inv_n = 1.0 / n;
  if (scores_out) scores_out->assign(n, {});
  const bool with_loss = !sample.targets.empty();
  if (with_loss && static_cast<int>(sample.targets.size()) != n)
    throw std::invalid_argument("model_forward: targets size disagrees with agents");
  for (int i = 0; i < n; ++i) {
    const ActionScores s = classify(at[i].f_prime, w.head);
    at[i].probs = s.scores;
    if (scores_out) (*scores_out)[i] = s.scores;
    if (with_loss) {
      at[i].targets = sample.targets[i];
      const auto [loss, grad] = focal_loss(s, sample.targets[i], cfg.focal);
      (void)grad;
      total += loss * inv_n;
    }
  }

  if (tape) {
    tape->agents = std::move(at);
    tape->att = std::move(att);
    tape->n = n;
    tape->d = d;
    tape->c = c;
    tape->hh = hh;
    tape->ww = ww;
    tape->attention_enabled = cfg.attention_enabled;
    tape->ln_gain = cfg.layer_norm_gain;
    tape->focal = cfg.focal;
    tape->inv_n = inv_n;
  }
  return total;
}

ModelGrads model_backward(const ModelWeights& w, const ForwardTape& tape) {
  ModelGrads g;
  g.reduce = Conv1x1Weights(w.reduce.c_out, w.reduce.c_in);
  g.hr2o.w_q = Conv1x1Weights(w.hr2o.w_q.c_out, w.hr2o.w_q.c_in);
  g.hr2o.w_k = Conv1x1Weights(w.hr2o.w_k.c_out, w.hr2o.w_k.c_in);
  g.hr2o.w_v = Conv1x1Weights(w.hr2o.w_v.c_out, w.hr2o.w_v.c_in);
  g.hr2o.w_out = Conv1x1Weights(w.hr2o.w_out.c_out, w.hr2o.w_out.c_in);
  g.hr2o.d = w.hr2o.d;
  g.head.n_actions = w.head.n_actions;
  g.head.in_dim = w.head.in_dim;
  g.head.w.assign(w.head.w.size(), 0.0);
  g.head.b.assign(w.head.b.size(), 0.0);

  const int n = tape.n;
  const int d = tape.d;
  const int c = tape.c;
  const int hh = tape.hh;
  const int ww = tape.ww;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<FeatureTensor> d_f(n, FeatureTensor(1, c, hh, ww));
  std::vector<FeatureTensor> d_h_tilde;
  std::vector<FeatureTensor> d_v(n, FeatureTensor(1, d, hh, ww));
  std::vector<FeatureTensor> d_q(n, FeatureTensor(1, d, hh, ww));
  std::vector<FeatureTensor> d_k(n, FeatureTensor(1, d, hh, ww));
  if (tape.attention_enabled) d_h_tilde.assign(n, FeatureTensor(1, d, hh, ww));

  for (int i = 0; i < n; ++i) {
    const AgentTape& a = tape.agents[i];

    // focal loss -> logits
    std::vector<double> dz(a.probs.size());
    for (std::size_t kk = 0; kk < a.probs.size(); ++kk) {
      double loss, dlogit;
      focal_term(a.probs[kk], a.targets[kk], tape.focal.gamma, tape.focal.alpha, loss, dlogit);
      (void)loss;
      dz[kk] = dlogit * tape.inv_n;
    }

    // head
    FeatureTensor d_fp(1, c, hh, ww);
    for (int kk = 0; kk < w.head.n_actions; ++kk) {
      const double* row = w.head.w.data() + static_cast<std::size_t>(kk) * w.head.in_dim;
      double* grow = g.head.w.data() + static_cast<std::size_t>(kk) * w.head.in_dim;
      g.head.b[kk] += dz[kk];
      for (int idx = 0; idx < w.head.in_dim; ++idx) {
        grow[idx] += dz[kk] * a.f_prime.data[idx];
        d_fp.data[idx] += dz[kk] * row[idx];
      }
    }

    // residual
    for (std::size_t idx = 0; idx < d_f[i].data.size(); ++idx) d_f[i].data[idx] += d_fp.data[idx];

    if (!tape.attention_enabled) continue;

    // dropout -> conv_out
    FeatureTensor d_conv_out = d_fp;
    for (std::size_t idx = 0; idx < d_conv_out.data.size(); ++idx)
      d_conv_out.data[idx] *= a.dropout_mask[idx];

    // 1x1 conv (d -> c) backward
    FeatureTensor d_relu(1, d, hh, ww);
    for (int y = 0; y < hh; ++y)
      for (int x = 0; x < ww; ++x)
        for (int co = 0; co < c; ++co) {
          const double dv = d_conv_out.at(0, co, y, x);
          g.hr2o.w_out.b[co] += dv;
          for (int ci = 0; ci < d; ++ci) {
            g.hr2o.w_out.at(co, ci) += dv * a.relu_out.at(0, ci, y, x);
            d_relu.at(0, ci, y, x) += dv * w.hr2o.w_out.at(co, ci);
          }
        }

    // ReLU and layer norm (constant affine)
    for (int y = 0; y < hh; ++y)
      for (int x = 0; x < ww; ++x) {
        const int pos = y * ww + x;
        const double inv = a.ln_inv_std[pos];
        double mean_dhat = 0.0;
        double mean_dhat_hat = 0.0;
        std::vector<double> dhat(d);
        for (int cc = 0; cc < d; ++cc) {
          const double mask = a.relu_out.at(0, cc, y, x) > 0.0 ? 1.0 : 0.0;
          dhat[cc] = d_relu.at(0, cc, y, x) * mask * tape.ln_gain;
          mean_dhat += dhat[cc];
          mean_dhat_hat += dhat[cc] * a.ln_hat.at(0, cc, y, x);
        }
        mean_dhat /= d;
        mean_dhat_hat /= d;
        for (int cc = 0; cc < d; ++cc)
          d_h_tilde[i].at(0, cc, y, x) =
              inv * (dhat[cc] - mean_dhat - a.ln_hat.at(0, cc, y, x) * mean_dhat_hat);
      }
  }

  if (tape.attention_enabled) {
    // attention backward couples all agents per spatial position
    for (int y = 0; y < hh; ++y)
      for (int x = 0; x < ww; ++x) {
        const int pos = y * ww + x;
        for (int i = 0; i < n; ++i) {
          const double* att_row = tape.att[i].data() + static_cast<std::size_t>(pos) * n;
          std::vector<double> d_att(n, 0.0);
          for (int j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int cc = 0; cc < d; ++cc) {
              const double dh = d_h_tilde[i].at(0, cc, y, x);
              dot += dh * tape.agents[j].v.at(0, cc, y, x);
              d_v[j].at(0, cc, y, x) += att_row[j] * dh;
            }
            d_att[j] = dot;
          }
          double weighted = 0.0;
          for (int j = 0; j < n; ++j) weighted += att_row[j] * d_att[j];
          for (int j = 0; j < n; ++j) {
            const double ds = att_row[j] * (d_att[j] - weighted) * scale;
            for (int cc = 0; cc < d; ++cc) {
              d_q[i].at(0, cc, y, x) += ds * tape.agents[j].k.at(0, cc, y, x);
              d_k[j].at(0, cc, y, x) += ds * tape.agents[i].q.at(0, cc, y, x);
            }
          }
        }
      }

    // Q/K/V convs backward (c -> d)
    auto conv_qkv_backward = [&](const FeatureTensor& d_out, const FeatureTensor& input,
                                 const Conv1x1Weights& weights, Conv1x1Weights& grads,
                                 FeatureTensor& d_input) {
      for (int y = 0; y < hh; ++y)
        for (int x = 0; x < ww; ++x)
          for (int co = 0; co < d; ++co) {
            const double dv = d_out.at(0, co, y, x);
            if (dv == 0.0) continue;
            grads.b[co] += dv;
            for (int ci = 0; ci < c; ++ci) {
              grads.at(co, ci) += dv * input.at(0, ci, y, x);
              d_input.at(0, ci, y, x) += dv * weights.at(co, ci);
            }
          }
    };
    for (int i = 0; i < n; ++i) {
      conv_qkv_backward(d_q[i], tape.agents[i].f, w.hr2o.w_q, g.hr2o.w_q, d_f[i]);
      conv_qkv_backward(d_k[i], tape.agents[i].f, w.hr2o.w_k, g.hr2o.w_k, d_f[i]);
      conv_qkv_backward(d_v[i], tape.agents[i].f, w.hr2o.w_v, g.hr2o.w_v, d_f[i]);
    }
  }

  // reduce conv backward
  for (int i = 0; i < n; ++i) {
    const AgentTape& a = tape.agents[i];
    for (int y = 0; y < hh; ++y)
      for (int x = 0; x < ww; ++x)
        for (int co = 0; co < c; ++co) {
          const double dv = d_f[i].at(0, co, y, x);
          if (dv == 0.0) continue;
          g.reduce.b[co] += dv;
          for (int ci = 0; ci < w.reduce.c_in; ++ci)
            g.reduce.at(co, ci) += dv * a.x.at(0, ci, y, x);
        }
  }

  return g;
}

// ---- training ---------------------------------------------------------------

namespace {

void collect_params(ModelWeights& w, std::vector<std::vector<double>*>& arrays) {
  arrays = {&w.reduce.w,     &w.reduce.b,     &w.hr2o.w_q.w, &w.hr2o.w_q.b,
            &w.hr2o.w_k.w,   &w.hr2o.w_k.b,   &w.hr2o.w_v.w, &w.hr2o.w_v.b,
            &w.hr2o.w_out.w, &w.hr2o.w_out.b, &w.head.w,     &w.head.b};
}

void collect_grads(ModelGrads& g, std::vector<std::vector<double>*>& arrays) {
  arrays = {&g.reduce.w,     &g.reduce.b,     &g.hr2o.w_q.w, &g.hr2o.w_q.b,
            &g.hr2o.w_k.w,   &g.hr2o.w_k.b,   &g.hr2o.w_v.w, &g.hr2o.w_v.b,
            &g.hr2o.w_out.w, &g.hr2o.w_out.b, &g.head.w,     &g.head.b};
}

void fill_uniform(std::vector<double>& v, double bound, Rng& rng) {
  for (double& x : v) x = rng.uniform(-bound, bound);
}

}  // namespace

ModelWeights init_model_weights(int c_agent, int c_ctx, int c_reduced, int d, int out_h,
                                int out_w, int n_actions, std::uint64_t seed) {
  Rng rng(seed);
  ModelWeights w;
  w.reduce = Conv1x1Weights(c_reduced, c_agent + c_ctx);
  fill_uniform(w.reduce.w, 1.0 / std::sqrt(static_cast<double>(c_agent + c_ctx)), rng);
  w.hr2o.w_q = Conv1x1Weights(d, c_reduced);
  w.hr2o.w_k = Conv1x1Weights(d, c_reduced);
  w.hr2o.w_v = Conv1x1Weights(d, c_reduced);
  w.hr2o.w_out = Conv1x1Weights(c_reduced, d);
  w.hr2o.d = d;
  const double bound_in = 1.0 / std::sqrt(static_cast<double>(c_reduced));
  fill_uniform(w.hr2o.w_q.w, bound_in, rng);
  fill_uniform(w.hr2o.w_k.w, bound_in, rng);
  fill_uniform(w.hr2o.w_v.w, bound_in, rng);
  fill_uniform(w.hr2o.w_out.w, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  w.head.n_actions = n_actions;
  w.head.in_dim = c_reduced * out_h * out_w;
  w.head.w.assign(static_cast<std::size_t>(n_actions) * w.head.in_dim, 0.0);
  w.head.b.assign(n_actions, 0.0);
  fill_uniform(w.head.w, 1.0 / std::sqrt(static_cast<double>(w.head.in_dim)), rng);
  return w;
}

TrainResult train_toy(const std::vector<ToySample>& samples, const TrainConfig& cfg,
                      ModelWeights init) {
  if (samples.empty()) throw std::invalid_argument("train_toy: empty dataset");
  ModelConfig mcfg;
  mcfg.attention_enabled = cfg.attention_enabled;
  mcfg.dropout_keep = cfg.dropout_keep;
  mcfg.focal = cfg.focal;
  mcfg.layer_norm_eps = cfg.layer_norm_eps;
  mcfg.layer_norm_gain = cfg.layer_norm_gain;
  mcfg.layer_norm_bias = cfg.layer_norm_bias;

  TrainResult result;
  result.weights = std::move(init);

  std::vector<std::vector<double>*> params;
  collect_params(result.weights, params);
  std::vector<std::vector<double>> momentum(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) momentum[i].assign(params[i]->size(), 0.0);

  Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<int> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the deterministic rng
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[order_rng.uniform_int(0, i)]);

    double epoch_loss = 0.0;
    for (int si : order) {
      TapePtr tape;
      const std::uint64_t dropout_seed =
          cfg.seed + 0x51ed2701ull * (epoch + 1) + 0x9127ull * si;
      const double loss = model_forward(result.weights, samples[si], mcfg, dropout_seed,
                                        nullptr, tape.p);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_toy: loss diverged (non-finite) at epoch " +
                                 std::to_string(epoch));
      epoch_loss += loss;
      ModelGrads grads = model_backward(result.weights, *tape.p);
      std::vector<std::vector<double>*> garrays;
      collect_grads(grads, garrays);

      for (std::size_t a = 0; a < params.size(); ++a) {
        std::vector<double>& p = *params[a];
        std::vector<double>& gv = *garrays[a];
        std::vector<double>& mv = momentum[a];
        for (std::size_t idx = 0; idx < p.size(); ++idx) {
          const double grad = gv[idx] + cfg.weight_decay * p[idx];
          mv[idx] = cfg.momentum * mv[idx] + grad;
          p[idx] -= cfg.learning_rate * (grad + cfg.momentum * mv[idx]);  // Nesterov
        }
      }
    }
    result.loss_curve.push_back(epoch_loss / samples.size());
  }
  return result;
}

double evaluate_argmax_accuracy(const ModelWeights& w, const std::vector<ToySample>& samples,
                                const ModelConfig& cfg) {
  int correct = 0;
  int total = 0;
  ModelConfig eval_cfg = cfg;
  eval_cfg.dropout_keep = 1.0;  // inference
  for (const auto& sample : samples) {
    std::vector<std::vector<double>> scores;
    model_forward(w, sample, eval_cfg, 0, &scores, nullptr);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto& s = scores[i];
      const auto& t = sample.targets[i];
      const int pred = static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
      const int truth = static_cast<int>(std::max_element(t.begin(), t.end()) - t.begin());
      correct += pred == truth ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

std::vector<ToySample> make_interaction_dataset(int n_samples, int c_agent, int c_ctx, int h,
                                                int w, std::uint64_t seed) {
  if (c_agent < 2) throw std::invalid_argument("make_interaction_dataset: need >= 2 channels");
  Rng rng(seed);
  std::vector<ToySample> samples;
  samples.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    ToySample sample;
    sample.context = FeatureTensor(1, c_ctx, h, w);
    const int bit0 = rng.uniform() < 0.5 ? 1 : 0;
    const int bit1 = rng.uniform() < 0.5 ? 1 : 0;
    const int bits[2] = {bit0, bit1};
    for (int i = 0; i < 2; ++i) {
      FeatureTensor feat(1, c_agent, h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          feat.at(0, 0, y, x) = bits[i] + rng.normal(0.0, 0.05);
          feat.at(0, 1, y, x) = (1 - bits[i]) + rng.normal(0.0, 0.05);
          for (int cc = 2; cc < c_agent; ++cc) feat.at(0, cc, y, x) = rng.normal(0.0, 0.1);
        }
      sample.agent_rois.push_back(std::move(feat));
      sample.class_ids.push_back(i);
      sample.track_ids.push_back(i);
    }
    // each agent's label is its neighbour's bit
    sample.targets.push_back(bits[1] == 1 ? std::vector<int>{0, 1} : std::vector<int>{1, 0});
    sample.targets.push_back(bits[0] == 1 ? std::vector<int>{0, 1} : std::vector<int>{1, 0});
    samples.push_back(std::move(sample));
  }
  return samples;
}

// ---- weights file -----------------------------------------------------------

namespace {

FeatureTensor matrix_tensor(const std::vector<double>& values, int rows, int cols) {
  FeatureTensor t(1, 1, rows, cols);
  t.data = values;
  return t;
}

FeatureTensor vector_tensor(const std::vector<double>& values) {
  FeatureTensor t(1, 1, 1, static_cast<int>(values.size()));
  t.data = values;
  return t;
}

const FeatureTensor& find_section(const NamedTensors& sections, const std::string& name) {
  for (const auto& [n, t] : sections)
    if (n == name) return t;
  throw std::runtime_error("weights file: missing section " + name);
}

Conv1x1Weights conv_from_sections(const NamedTensors& sections, const std::string& prefix) {
  const FeatureTensor& wm = find_section(sections, prefix + ".w");
  const FeatureTensor& bv = find_section(sections, prefix + ".b");
  Conv1x1Weights out(wm.h, wm.w);
  out.w = wm.data;
  out.b = bv.data;
  out.validate();
  return out;
}

}  // namespace

void save_model_weights(const ModelWeights& w, const std::string& path) {
  w.validate();
  NamedTensors sections;
  auto add_conv = [&](const std::string& prefix, const Conv1x1Weights& cw) {
    sections.emplace_back(prefix + ".w", matrix_tensor(cw.w, cw.c_out, cw.c_in));
    sections.emplace_back(prefix + ".b", vector_tensor(cw.b));
  };
  add_conv("reduce", w.reduce);
  add_conv("q", w.hr2o.w_q);
  add_conv("k", w.hr2o.w_k);
  add_conv("v", w.hr2o.w_v);
  add_conv("out", w.hr2o.w_out);
  sections.emplace_back("head.w", matrix_tensor(w.head.w, w.head.n_actions, w.head.in_dim));
  sections.emplace_back("head.b", vector_tensor(w.head.b));
  write_named_tensors(sections, path);
}

ModelWeights load_model_weights(const std::string& path) {
  const NamedTensors sections = read_named_tensors(path);
  ModelWeights w;
  w.reduce = conv_from_sections(sections, "reduce");
  w.hr2o.w_q = conv_from_sections(sections, "q");
  w.hr2o.w_k = conv_from_sections(sections, "k");
  w.hr2o.w_v = conv_from_sections(sections, "v");
  w.hr2o.w_out = conv_from_sections(sections, "out");
  w.hr2o.d = w.hr2o.w_q.c_out;
  const FeatureTensor& hw = find_section(sections, "head.w");
  const FeatureTensor& hb = find_section(sections, "head.b");
  w.head.n_actions = hw.h;
  w.head.in_dim = hw.w;
  w.head.w = hw.data;
  w.head.b = hb.data;
  w.validate();
  return w;
}

}  // namespace ralacs
