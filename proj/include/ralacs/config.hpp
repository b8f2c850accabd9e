#pragma once

#include <set>
#include <string>

namespace ralacs {

/// Run configuration shared by every stage. Loaded from a flat key=value
/// file; unknown keys are an error.
struct PipelineConfig {
  // clip / windowing
  int clip_length = 32;  // l; must be even
  int slow_frames = 8;   // T_s of the slow pathway; alpha = clip_length / slow_frames

  // tracker
  double iou_assoc_threshold = 0.3;
  int kalman_delta_t = 3;
  double kalman_inertia = 0.2;
  double kalman_process_noise_pos = 1e-2;
  double kalman_process_noise_vel = 1e-2;
  double kalman_obs_noise_pos = 1.0;
  double kalman_obs_noise_size = 10.0;
  int interp_max_gap = 32;  // box interpolation within gaps of <= 32 frames

  // detection / pseudo labels
  double nms_threshold = 0.3;  // deliberately low to keep tracking candidates
  double pseudo_conf_threshold = 0.9;
  double pseudo_iou_threshold = 0.2;
  int inactive_class = 0;

  // features
  int feature_levels = 2;
  int feature_channels = 8;
  int roi_out = 7;
  int roi_samples = 2;
  double roi_offset = 0.0;

  // interaction head
  int reduced_channels = 16;
  int attention_dim = 16;
  int hr2o_depth = 1;
  double dropout_rate = 0.2;
  double layer_norm_eps = 1e-5;
  double layer_norm_gain = 1.0;
  double layer_norm_bias = 0.0;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;

  // training (desk-scale)
  double learning_rate = 1e-2;
  double train_momentum = 0.9;
  double weight_decay = 1e-5;
  int train_epochs = 60;
  int train_stride = 4;  // window stride when building training clips
  unsigned long long train_seed = 7;

  // post-processing / decisions
  double trim_epsilon = 0.001;
  std::set<int> interference_set;  // default {Stop, Wait2X}
  double history_window = 5.0;     // seconds

  int n_actions = 10;

  PipelineConfig();

  /// Throws std::invalid_argument when a field is outside its documented range.
  void validate() const;
};

PipelineConfig load_config(const std::string& path);
void save_config(const PipelineConfig& cfg, const std::string& path);

/// Parses the body of a config file (used by load_config and tests).
PipelineConfig parse_config(const std::string& text);

}  // namespace ralacs
