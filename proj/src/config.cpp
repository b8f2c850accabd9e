#include "ralacs/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ralacs/actions.hpp"

namespace ralacs {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for " + key + ": " + value);
  }
  if (pos != value.size())
    throw std::invalid_argument("config: bad numeric value for " + key + ": " + value);
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw std::invalid_argument("config: expected integer for " + key + ": " + value);
  return i;
}

std::set<int> parse_action_set(const std::string& value) {
  std::set<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    bool numeric = true;
    for (char ch : item)
      if (!isdigit(static_cast<unsigned char>(ch)) && ch != '-') numeric = false;
    out.insert(numeric ? std::stoi(item) : action_id(item));
  }
  return out;
}

std::string format_action_set(const std::set<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += ",";
    out += action_name(id);
  }
  return out;
}

}  // namespace

PipelineConfig::PipelineConfig() {
  interference_set = {kActionStop, kActionWait2X};
}

void PipelineConfig::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (clip_length <= 0 || clip_length % 2 != 0)
    throw std::invalid_argument("config: clip_length must be positive and even");
  if (slow_frames <= 0 || clip_length % slow_frames != 0)
    throw std::invalid_argument("config: slow_frames must divide clip_length");
  if (!in01(iou_assoc_threshold)) throw std::invalid_argument("config: iou_assoc_threshold outside [0,1]");
  if (kalman_delta_t < 1) throw std::invalid_argument("config: kalman_delta_t must be >= 1");
  if (!in01(kalman_inertia)) throw std::invalid_argument("config: kalman_inertia outside [0,1]");
  if (!in01(nms_threshold)) throw std::invalid_argument("config: nms_threshold outside [0,1]");
  if (!in01(pseudo_conf_threshold)) throw std::invalid_argument("config: pseudo_conf_threshold outside [0,1]");
  if (!in01(pseudo_iou_threshold)) throw std::invalid_argument("config: pseudo_iou_threshold outside [0,1]");
  if (trim_epsilon <= 0.0) throw std::invalid_argument("config: trim_epsilon must be > 0");
  if (history_window <= 0.0) throw std::invalid_argument("config: history_window must be > 0");
  if (focal_gamma < 0.0) throw std::invalid_argument("config: focal_gamma must be >= 0");
  if (!(focal_alpha > 0.0 && focal_alpha < 1.0))
    throw std::invalid_argument("config: focal_alpha outside (0,1)");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("config: dropout_rate outside [0,1)");
  if (interp_max_gap < 0) throw std::invalid_argument("config: interp_max_gap must be >= 0");
  if (roi_out < 1 || roi_samples < 1)
    throw std::invalid_argument("config: roi_out and roi_samples must be >= 1");
  if (feature_levels < 1) throw std::invalid_argument("config: feature_levels must be >= 1");
  if (feature_channels < 1 || reduced_channels < 1 || attention_dim < 1)
    throw std::invalid_argument("config: channel counts must be >= 1");
  if (hr2o_depth < 1) throw std::invalid_argument("config: hr2o_depth must be >= 1");
  if (n_actions < 1) throw std::invalid_argument("config: n_actions must be >= 1");
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters;
  auto d = [](double& field) {
    double* p = &field;
    return [p](const std::string& k, const std::string& v) { *p = parse_double(k, v); };
  };
  auto i = [](int& field) {
    int* p = &field;
    return [p](const std::string& k, const std::string& v) { *p = parse_int(k, v); };
  };
  setters["clip_length"] = i(cfg.clip_length);
  setters["slow_frames"] = i(cfg.slow_frames);
  setters["iou_assoc_threshold"] = d(cfg.iou_assoc_threshold);
  setters["kalman_delta_t"] = i(cfg.kalman_delta_t);
  setters["kalman_inertia"] = d(cfg.kalman_inertia);
  setters["kalman_process_noise_pos"] = d(cfg.kalman_process_noise_pos);
  setters["kalman_process_noise_vel"] = d(cfg.kalman_process_noise_vel);
  setters["kalman_obs_noise_pos"] = d(cfg.kalman_obs_noise_pos);
  setters["kalman_obs_noise_size"] = d(cfg.kalman_obs_noise_size);
  setters["interp_max_gap"] = i(cfg.interp_max_gap);
  setters["nms_threshold"] = d(cfg.nms_threshold);
  setters["pseudo_conf_threshold"] = d(cfg.pseudo_conf_threshold);
  setters["pseudo_iou_threshold"] = d(cfg.pseudo_iou_threshold);
  setters["inactive_class"] = i(cfg.inactive_class);
  setters["feature_levels"] = i(cfg.feature_levels);
  setters["feature_channels"] = i(cfg.feature_channels);
  setters["roi_out"] = i(cfg.roi_out);
  setters["roi_samples"] = i(cfg.roi_samples);
  setters["roi_offset"] = d(cfg.roi_offset);
  setters["reduced_channels"] = i(cfg.reduced_channels);
  setters["attention_dim"] = i(cfg.attention_dim);
  setters["hr2o_depth"] = i(cfg.hr2o_depth);
  setters["dropout_rate"] = d(cfg.dropout_rate);
  setters["layer_norm_eps"] = d(cfg.layer_norm_eps);
  setters["layer_norm_gain"] = d(cfg.layer_norm_gain);
  setters["layer_norm_bias"] = d(cfg.layer_norm_bias);
  setters["focal_gamma"] = d(cfg.focal_gamma);
  setters["focal_alpha"] = d(cfg.focal_alpha);
  setters["learning_rate"] = d(cfg.learning_rate);
  setters["train_momentum"] = d(cfg.train_momentum);
  setters["weight_decay"] = d(cfg.weight_decay);
  setters["train_epochs"] = i(cfg.train_epochs);
  setters["train_stride"] = i(cfg.train_stride);
  setters["train_seed"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.train_seed = static_cast<unsigned long long>(parse_double(k, v));
  };
  setters["trim_epsilon"] = d(cfg.trim_epsilon);
  setters["history_window"] = d(cfg.history_window);
  setters["n_actions"] = i(cfg.n_actions);
  setters["interference_set"] = [&cfg](const std::string&, const std::string& v) {
    cfg.interference_set = parse_action_set(v);
  };

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end())
      throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second(key, value);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path + " for writing");
  f.precision(17);
  f << "clip_length=" << cfg.clip_length << "\n";
  f << "slow_frames=" << cfg.slow_frames << "\n";
  f << "iou_assoc_threshold=" << cfg.iou_assoc_threshold << "\n";
  f << "kalman_delta_t=" << cfg.kalman_delta_t << "\n";
  f << "kalman_inertia=" << cfg.kalman_inertia << "\n";
  f << "kalman_process_noise_pos=" << cfg.kalman_process_noise_pos << "\n";
  f << "kalman_process_noise_vel=" << cfg.kalman_process_noise_vel << "\n";
  f << "kalman_obs_noise_pos=" << cfg.kalman_obs_noise_pos << "\n";
  f << "kalman_obs_noise_size=" << cfg.kalman_obs_noise_size << "\n";
  f << "interp_max_gap=" << cfg.interp_max_gap << "\n";
  f << "nms_threshold=" << cfg.nms_threshold << "\n";
  f << "pseudo_conf_threshold=" << cfg.pseudo_conf_threshold << "\n";
  f << "pseudo_iou_threshold=" << cfg.pseudo_iou_threshold << "\n";
  f << "inactive_class=" << cfg.inactive_class << "\n";
  f << "feature_levels=" << cfg.feature_levels << "\n";
  f << "feature_channels=" << cfg.feature_channels << "\n";
  f << "roi_out=" << cfg.roi_out << "\n";
  f << "roi_samples=" << cfg.roi_samples << "\n";
  f << "roi_offset=" << cfg.roi_offset << "\n";
  f << "reduced_channels=" << cfg.reduced_channels << "\n";
  f << "attention_dim=" << cfg.attention_dim << "\n";
  f << "hr2o_depth=" << cfg.hr2o_depth << "\n";
  f << "dropout_rate=" << cfg.dropout_rate << "\n";
  f << "layer_norm_eps=" << cfg.layer_norm_eps << "\n";
  f << "layer_norm_gain=" << cfg.layer_norm_gain << "\n";
  f << "layer_norm_bias=" << cfg.layer_norm_bias << "\n";
  f << "focal_gamma=" << cfg.focal_gamma << "\n";
  f << "focal_alpha=" << cfg.focal_alpha << "\n";
  f << "learning_rate=" << cfg.learning_rate << "\n";
  f << "train_momentum=" << cfg.train_momentum << "\n";
  f << "weight_decay=" << cfg.weight_decay << "\n";
  f << "train_epochs=" << cfg.train_epochs << "\n";
  f << "train_stride=" << cfg.train_stride << "\n";
  f << "train_seed=" << cfg.train_seed << "\n";
  f << "trim_epsilon=" << cfg.trim_epsilon << "\n";
  f << "history_window=" << cfg.history_window << "\n";
  f << "n_actions=" << cfg.n_actions << "\n";
  f << "interference_set=" << format_action_set(cfg.interference_set) << "\n";
}

}  // namespace ralacs
