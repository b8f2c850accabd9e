#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ralacs/kernels.hpp"
#include "ralacs/tensor.hpp"
#include "ralacs/types.hpp"

namespace ralacs {

/// One agent entering the interaction block: its aligned, context-reduced
/// feature map (1 x C x h x w).
struct AgentFeature {
  FeatureTensor feat;
  int track_id = 0;
  int class_id = 0;
};

struct Hr2oWeights {
  Conv1x1Weights w_q, w_k, w_v;  // C -> d
  Conv1x1Weights w_out;          // d -> C
  int d = 0;

  void validate() const;
};

struct HeadWeights {
  int n_actions = 0;
  int in_dim = 0;                // C * out_h * out_w
  std::vector<double> w;         // n_actions x in_dim row-major
  std::vector<double> b;         // n_actions

  void validate() const;
};

struct FocalLossSpec {
  double gamma = 2.0;
  double alpha = 0.25;
};

/// Channel-concatenates the agent map with the (already pooled) clip context
/// and reduces with a 1x1 convolution.
FeatureTensor agent_context_reduce(const FeatureTensor& agent_roi,
                                   const FeatureTensor& clip_context,
                                   const Conv1x1Weights& w_reduce);

/// Higher-order relations block over all agents, per spatial location:
/// Q/K/V embeddings, scaled dot-product attention across agents (self
/// included), value aggregation, norm/ReLU/conv/dropout, residual add.
/// dropout_keep = 1 disables dropout.
std::vector<FeatureTensor> hr2o_forward(const std::vector<AgentFeature>& agents,
                                        const Hr2oWeights& w, double dropout_keep,
                                        std::uint64_t rng_seed,
                                        double layer_norm_eps = 1e-5,
                                        double layer_norm_gain = 1.0,
                                        double layer_norm_bias = 0.0);

/// Per-agent multi-label scores: sigmoid(w_fc . flatten(agent_out) + b_fc).
ActionScores classify(const FeatureTensor& agent_out, const HeadWeights& w,
                      int track_id = 0, int key_frame_index = 0);

/// Alpha-balanced sigmoid focal loss summed over classes, with the analytic
/// gradient w.r.t. the pre-sigmoid logits. Targets must be 0/1.
std::pair<double, std::vector<double>> focal_loss(const ActionScores& scores,
                                                  const std::vector<int>& targets,
                                                  const FocalLossSpec& spec);

// ---- full trainable head ---------------------------------------------------

struct ModelWeights {
  Conv1x1Weights reduce;  // (C_agent + C_ctx) -> C
  Hr2oWeights hr2o;
  HeadWeights head;

  void validate() const;
};

struct ModelGrads {
  Conv1x1Weights reduce;
  Hr2oWeights hr2o;
  HeadWeights head;
};

/// One training/inference example: raw aligned agent maps, the shared pooled
/// clip context, and per-agent binary targets (empty when unused).
struct ToySample {
  std::vector<FeatureTensor> agent_rois;
  FeatureTensor context;
  std::vector<std::vector<int>> targets;
  std::vector<int> class_ids;
  std::vector<int> track_ids;
};

struct ModelConfig {
  bool attention_enabled = true;  // false forces H_i = 0 (ablation)
  double dropout_keep = 1.0;
  double layer_norm_eps = 1e-5;
  double layer_norm_gain = 1.0;
  double layer_norm_bias = 0.0;
  FocalLossSpec focal;
};

struct ForwardTape;  // opaque record of every intermediate needed by backward

/// Runs reduce -> HR2O -> classify -> focal loss over one sample. The loss is
/// the per-agent mean of the summed-class focal losses. Returns scores per
/// agent; fills the tape when given one (dropout masks recorded).
double model_forward(const ModelWeights& w, const ToySample& sample,
                     const ModelConfig& cfg, std::uint64_t dropout_seed,
                     std::vector<std::vector<double>>* scores_out,
                     ForwardTape* tape);

/// Analytic gradients of the recorded forward pass for every weight.
ModelGrads model_backward(const ModelWeights& w, const ForwardTape& tape);

ForwardTape* new_tape();
void free_tape(ForwardTape* tape);

struct TapePtr {
  ForwardTape* p;
  TapePtr() : p(new_tape()) {}
  ~TapePtr() { free_tape(p); }
  TapePtr(const TapePtr&) = delete;
  TapePtr& operator=(const TapePtr&) = delete;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;      // Nesterov
  double weight_decay = 1e-5;
  int epochs = 60;
  std::uint64_t seed = 7;
  bool attention_enabled = true;
  double dropout_keep = 1.0;
  FocalLossSpec focal;
  double layer_norm_eps = 1e-5;
  double layer_norm_gain = 1.0;
  double layer_norm_bias = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<double> loss_curve;  // mean per-sample loss per epoch
};

ModelWeights init_model_weights(int c_agent, int c_ctx, int c_reduced, int d,
                                int out_h, int out_w, int n_actions,
                                std::uint64_t seed);

/// SGD with Nesterov momentum and weight decay; throws on divergence.
TrainResult train_toy(const std::vector<ToySample>& samples, const TrainConfig& cfg,
                      ModelWeights init);

/// Argmax accuracy of the model on a sample set (targets must be one-hot).
double evaluate_argmax_accuracy(const ModelWeights& w, const std::vector<ToySample>& samples,
                                const ModelConfig& cfg);

/// Constructed two-agent task where each agent's label is its neighbour's
/// feature bit; unsolvable without cross-agent attention.
std::vector<ToySample> make_interaction_dataset(int n_samples, int c_agent, int c_ctx,
                                                int h, int w, std::uint64_t seed);

// weights file sections
void save_model_weights(const ModelWeights& w, const std::string& path);
ModelWeights load_model_weights(const std::string& path);

}  // namespace ralacs
