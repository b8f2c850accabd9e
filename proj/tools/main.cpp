#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "ralacs/actions.hpp"
#include "ralacs/config.hpp"
#include "ralacs/droi_align.hpp"
#include "ralacs/env_model.hpp"
#include "ralacs/eval.hpp"
#include "ralacs/flow_fusion.hpp"
#include "ralacs/interaction.hpp"
#include "ralacs/io.hpp"
#include "ralacs/pipeline.hpp"
#include "ralacs/postprocess.hpp"
#include "ralacs/tracker.hpp"

namespace fs = std::filesystem;
using namespace ralacs;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

FeaturePyramid read_pyramid(const std::string& csv) {
  FeaturePyramid pyr;
  for (const auto& path : split_list(csv)) pyr.levels.push_back(read_tensor(path));
  pyr.validate();
  return pyr;
}

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

std::set<int> parse_int_set(const std::string& csv) {
  std::set<int> out;
  for (const auto& item : split_list(csv)) {
    if (isdigit(static_cast<unsigned char>(item[0])) || item[0] == '-')
      out.insert(std::stoi(item));
    else
      out.insert(action_id(item));
  }
  return out;
}

Tubelet scale_tube(const Tubelet& tube, double scale) {
  Tubelet out = tube;
  for (auto& box : out.boxes)
    if (box)
      *box = BoundingBox(box->x1 * scale, box->y1 * scale, box->x2 * scale, box->y2 * scale);
  return out;
}

FeatureTensor stack_agents(const std::vector<FeatureTensor>& agents) {
  const FeatureTensor& proto = agents.front();
  FeatureTensor out(static_cast<int>(agents.size()), proto.c, proto.h, proto.w);
  const std::size_t slice = proto.data.size();
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!agents[i].same_shape(proto))
      throw std::invalid_argument("stacked agent tensors must share one shape");
    std::copy(agents[i].data.begin(), agents[i].data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(slice) * i);
  }
  return out;
}

// ---- train-toy on-disk dataset ---------------------------------------------

std::string sample_path(const std::string& dir, int index, const char* part) {
  char name[64];
  std::snprintf(name, sizeof(name), "sample_%04d.%s", index, part);
  return (fs::path(dir) / name).string();
}

std::vector<ToySample> read_toy_dataset(const std::string& dir) {
  std::vector<ToySample> samples;
  for (int i = 0;; ++i) {
    const std::string agents_path = sample_path(dir, i, "agents.bin");
    if (!fs::exists(agents_path)) break;
    const FeatureTensor stacked = read_tensor(agents_path);
    ToySample sample;
    for (int a = 0; a < stacked.t; ++a) sample.agent_rois.push_back(stacked.slice_t(a));
    sample.context = read_tensor(sample_path(dir, i, "context.bin"));
    for (const auto& line : read_lines(sample_path(dir, i, "targets.jsonl"))) {
      const auto j = nlohmann::json::parse(line);
      sample.targets.push_back(j.at("targets").get<std::vector<int>>());
      sample.class_ids.push_back(j.value("class_id", 0));
      sample.track_ids.push_back(j.value("track_id", 0));
    }
    if (sample.targets.size() != sample.agent_rois.size())
      throw std::runtime_error("toy dataset: targets do not match agents in " + agents_path);
    samples.push_back(std::move(sample));
  }
  if (samples.empty()) throw std::runtime_error("toy dataset: no samples under " + dir);
  return samples;
}

void write_toy_dataset(const std::vector<ToySample>& samples, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sample = samples[i];
    write_tensor(stack_agents(sample.agent_rois),
                 sample_path(dir, static_cast<int>(i), "agents.bin"));
    write_tensor(sample.context, sample_path(dir, static_cast<int>(i), "context.bin"));
    std::vector<std::string> lines;
    for (std::size_t a = 0; a < sample.targets.size(); ++a) {
      nlohmann::json j{{"targets", sample.targets[a]}};
      if (a < sample.class_ids.size()) j["class_id"] = sample.class_ids[a];
      if (a < sample.track_ids.size()) j["track_id"] = sample.track_ids[a];
      lines.push_back(j.dump());
    }
    write_lines(lines, sample_path(dir, static_cast<int>(i), "targets.jsonl"));
  }
}

// ---- subcommands -------------------------------------------------------------

int cmd_fuse(const std::string& rgb, const std::string& flow, const std::string& out) {
  const FeaturePyramid fused = fuse_fpn(read_pyramid(rgb), read_pyramid(flow));
  const auto out_paths = split_list(out);
  if (out_paths.size() != fused.levels.size())
    throw std::runtime_error("fuse: need one output path per pyramid level");
  for (std::size_t i = 0; i < out_paths.size(); ++i)
    write_tensor(fused.levels[i], out_paths[i]);
  return 0;
}

int cmd_flowviz(const std::string& flow_path, const std::string& out) {
  write_tensor(flow_to_colorwheel(read_flow(flow_path)), out);
  return 0;
}

int cmd_pseudolabel(const std::string& dets, const std::string& gt, const std::string& out,
                    double conf, double iou_thr, int relabel_class) {
  PseudoLabelRule rule;
  rule.conf_threshold = conf;
  rule.iou_threshold = iou_thr;
  rule.relabel_class = relabel_class;
  write_detections_jsonl(
      generate_pseudo_labels(read_detections_jsonl(dets), read_detections_jsonl(gt), rule),
      out);
  return 0;
}

int cmd_track(const std::string& dets_path, const std::string& config_path,
              const std::string& out) {
  const PipelineConfig cfg = config_or_default(config_path);
  std::map<int, std::vector<Detection>> by_frame;
  int last = 0;
  for (const auto& det : read_detections_jsonl(dets_path)) {
    by_frame[det.frame_index].push_back(det);
    last = std::max(last, det.frame_index);
  }
  TrackerState state;
  static const std::vector<Detection> empty;
  for (int f = 0; f <= last; ++f) {
    const auto it = by_frame.find(f);
    tracker_step(state, it == by_frame.end() ? empty : it->second, f, cfg);
  }
  write_tubelets_jsonl(extract_all_tubelets(state, 0, last, cfg), out);
  return 0;
}

int cmd_align(const std::string& features, const std::string& tubes_path,
              const std::string& mode, const std::string& out, double scale,
              const std::string& config_path) {
  const auto paths = split_list(features);
  if (paths.size() != 2) throw std::runtime_error("align: --features wants slow.bin,fast.bin");
  TwoRateFeatures feats;
  feats.slow = read_tensor(paths[0]);
  feats.fast = read_tensor(paths[1]);
  feats.validate();
  const PipelineConfig cfg = config_or_default(config_path);
  RoiAlignSpec spec;
  spec.out_h = spec.out_w = cfg.roi_out;
  spec.samples_per_bin = cfg.roi_samples;
  spec.coordinate_offset = cfg.roi_offset;

  std::vector<FeatureTensor> aligned;
  for (const auto& tube : read_tubelets_jsonl(tubes_path)) {
    const Tubelet scaled = scale_tube(tube, scale);
    if (mode == "droi") {
      if (scaled.length() != feats.fast.t)
        throw std::runtime_error("align: tube length must equal the fast temporal length");
      std::vector<int> slot_map(scaled.length());
      for (int i = 0; i < scaled.length(); ++i) slot_map[i] = i;
      aligned.push_back(droi_align(feats, scaled, slot_map, spec));
    } else if (mode == "key") {
      const int key_slot = scaled.length() / 2;
      if (!scaled.boxes[key_slot])
        throw std::runtime_error("align: tube has no box at its key slot");
      aligned.push_back(keyframe_align(feats, *scaled.boxes[key_slot], spec));
    } else {
      throw std::runtime_error("align: mode must be key or droi");
    }
  }
  if (aligned.empty()) throw std::runtime_error("align: no tubes in " + tubes_path);
  write_tensor(stack_agents(aligned), out);
  return 0;
}

int cmd_classify(const std::string& features, const std::string& context_path,
                 const std::string& weights_path, const std::string& out, int key_frame,
                 const std::string& tubes_path, const std::string& config_path) {
  const ModelWeights weights = load_model_weights(weights_path);
  const PipelineConfig cfg = config_or_default(config_path);
  const FeatureTensor stacked = read_tensor(features);
  const int c_ctx = weights.reduce.c_in - stacked.c;
  if (c_ctx < 1)
    throw std::runtime_error("classify: agent channels incompatible with the weights");
  FeatureTensor context(1, c_ctx, stacked.h, stacked.w);
  if (!context_path.empty()) context = read_tensor(context_path);

  std::vector<int> track_ids(stacked.t);
  for (int i = 0; i < stacked.t; ++i) track_ids[i] = i;
  std::vector<int> class_ids(stacked.t, 0);
  if (!tubes_path.empty()) {
    const auto tubes = read_tubelets_jsonl(tubes_path);
    for (int i = 0; i < stacked.t && i < static_cast<int>(tubes.size()); ++i) {
      track_ids[i] = tubes[i].track_id;
      class_ids[i] = tubes[i].class_id;
    }
  }

  std::vector<AgentFeature> agents;
  for (int i = 0; i < stacked.t; ++i) {
    AgentFeature agent;
    agent.feat = agent_context_reduce(stacked.slice_t(i), context, weights.reduce);
    agent.track_id = track_ids[i];
    agent.class_id = class_ids[i];
    agents.push_back(std::move(agent));
  }
  std::vector<FeatureTensor> outs;
  {
    std::vector<AgentFeature> current = agents;
    for (int depth = 0; depth < cfg.hr2o_depth; ++depth) {
      outs = hr2o_forward(current, weights.hr2o, 1.0, 0, cfg.layer_norm_eps,
                          cfg.layer_norm_gain, cfg.layer_norm_bias);
      for (std::size_t i = 0; i < current.size(); ++i) current[i].feat = outs[i];
    }
  }
  std::vector<ActionScores> scores;
  for (std::size_t i = 0; i < agents.size(); ++i)
    scores.push_back(classify(outs[i], weights.head, agents[i].track_id, key_frame));
  write_scores_jsonl(scores, out);
  return 0;
}

int cmd_train_toy(const std::string& data_dir, const std::string& config_path,
                  const std::string& out) {
  const PipelineConfig cfg = config_or_default(config_path);
  const std::vector<ToySample> samples = read_toy_dataset(data_dir);

  const auto& first = samples.front();
  const int c_agent = first.agent_rois.front().c;
  const int c_ctx = first.context.c;
  const int n_actions = static_cast<int>(first.targets.front().size());

  TrainConfig tcfg;
  tcfg.learning_rate = cfg.learning_rate;
  tcfg.momentum = cfg.train_momentum;
  tcfg.weight_decay = cfg.weight_decay;
  tcfg.epochs = cfg.train_epochs;
  tcfg.seed = cfg.train_seed;
  tcfg.dropout_keep = 1.0 - cfg.dropout_rate;
  tcfg.focal = {cfg.focal_gamma, cfg.focal_alpha};
  tcfg.layer_norm_eps = cfg.layer_norm_eps;
  tcfg.layer_norm_gain = cfg.layer_norm_gain;
  tcfg.layer_norm_bias = cfg.layer_norm_bias;

  ModelWeights init = init_model_weights(
      c_agent, c_ctx, cfg.reduced_channels, cfg.attention_dim, first.agent_rois.front().h,
      first.agent_rois.front().w, n_actions, cfg.train_seed);
  const TrainResult result = train_toy(samples, tcfg, std::move(init));
  save_model_weights(result.weights, out);
  std::cout << "epochs " << result.loss_curve.size() << ", final loss "
            << result.loss_curve.back() << "\n";
  return 0;
}

int cmd_toy_data(const std::string& out_dir, int n_samples, unsigned long long seed,
                 int channels, int context_channels, int size) {
  write_toy_dataset(
      make_interaction_dataset(n_samples, channels, context_channels, size, size, seed),
      out_dir);
  return 0;
}

int cmd_trim(const std::string& tubes_path, double epsilon, const std::string& out) {
  std::vector<ActionTrack> tracks;
  for (const auto& tube : read_scored_tubes_jsonl(tubes_path)) {
    const int n_actions = static_cast<int>(tube.scores.front().size());
    for (int cls = 0; cls < n_actions; ++cls) {
      const auto trimmed = trim_tube(tube, cls, epsilon);
      tracks.insert(tracks.end(), trimmed.begin(), trimmed.end());
    }
  }
  write_tracks_jsonl(tracks, out);
  return 0;
}

int cmd_sync(const std::string& frames_path, const std::string& dets_path,
             const std::string& out) {
  write_tracked_jsonl(time_sync(read_timestamps(frames_path), read_tracked_jsonl(dets_path)),
                      out);
  return 0;
}

int cmd_conflict(const std::string& history_path, double now, const std::string& int_set,
                 double window) {
  ConflictDecisionSpec spec;
  if (!int_set.empty()) spec.interference_set = parse_int_set(int_set);
  spec.window = window;
  const bool decision = handle_pedestrian(read_history_jsonl(history_path), now, spec);
  std::cout << (decision ? "true" : "false") << "\n";
  return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir) {
  const Scenario scenario = load_scenario(scenario_path);
  const GeneratedScenario gen = generate(scenario);
  fs::create_directories(fs::path(out_dir) / "frames");
  fs::create_directories(fs::path(out_dir) / "flows");
  char name[64];
  for (std::size_t f = 0; f < gen.frames.size(); ++f) {
    std::snprintf(name, sizeof(name), "frame_%04zu.bin", f);
    write_tensor(gen.frames[f], (fs::path(out_dir) / "frames" / name).string());
  }
  for (std::size_t f = 0; f < gen.flows.size(); ++f) {
    std::snprintf(name, sizeof(name), "flow_%04zu.bin", f);
    write_flow(gen.flows[f], (fs::path(out_dir) / "flows" / name).string());
  }
  write_detections_jsonl(gen.detections, (fs::path(out_dir) / "detections.jsonl").string());
  write_scored_boxes_jsonl(gen.gt_boxes, (fs::path(out_dir) / "gt_boxes.jsonl").string(),
                           false);
  write_tracks_jsonl(gen.gt_tracks, (fs::path(out_dir) / "gt_tracks.jsonl").string());
  write_tubelets_jsonl(gen.gt_tubes, (fs::path(out_dir) / "gt_tubes.jsonl").string());
  std::cout << "frames " << gen.frames.size() << ", detections " << gen.detections.size()
            << ", gt tracks " << gen.gt_tracks.size() << "\n";
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& mode,
             double iou_thr, const std::string& report_path) {
  EvalReport report;
  if (mode == "frame") {
    report = frame_map(read_scored_boxes_jsonl(pred), read_scored_boxes_jsonl(gt), iou_thr);
  } else if (mode == "video") {
    report = video_map(read_tracks_jsonl(pred), read_tracks_jsonl(gt), iou_thr);
  } else {
    throw std::runtime_error("eval: mode must be frame or video");
  }
  write_report(report, report_path);
  std::cout << "mAP " << report.mean_ap << " over " << report.per_class.size()
            << " classes\n";
  return 0;
}

int cmd_run(const std::string& scenario_path, const std::string& config_path,
            const std::string& report_path, const std::string& weights_path,
            const std::string& tracks_out, const std::string& save_weights) {
  const Scenario scenario = load_scenario(scenario_path);
  const PipelineConfig cfg = config_or_default(config_path);
  const ModelWeights weights = weights_path.empty() ? train_from_scenario(scenario, cfg)
                                                    : load_model_weights(weights_path);
  if (!save_weights.empty()) save_model_weights(weights, save_weights);
  const PipelineResult result = run_pipeline(scenario, cfg, weights);

  nlohmann::json report{
      {"frame", nlohmann::json::parse(report_to_json(result.frame_report))},
      {"video", nlohmann::json::parse(report_to_json(result.video_report))},
      {"first_key_frame", result.first_key_frame},
      {"last_key_frame", result.last_key_frame},
      {"num_action_tracks", result.tracks.size()},
      {"num_frame_predictions", result.frame_predictions.size()},
  };
  std::ofstream f(report_path);
  if (!f) throw std::runtime_error("run: cannot open " + report_path + " for writing");
  f << report.dump(2) << "\n";

  if (!tracks_out.empty()) write_tracks_jsonl(result.tracks, tracks_out);
  std::cout << "frame mAP " << result.frame_report.mean_ap << ", video mAP "
            << result.video_report.mean_ap << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RALACS road action recognition pipeline"};
  app.require_subcommand(1);

  std::string rgb, flow, out, dets, gt, config_path, mode, features, tubes;
  std::string weights_path, context_path, data_dir, history_path, scenario_path;
  std::string report_path, frames_path, tracks_out, save_weights, int_set;
  double conf = 0.9, iou_thr = 0.2, scale = 1.0, epsilon = 0.001, now = 0.0, window = 5.0;
  double eval_iou = 0.5;
  int relabel_class = 0, key_frame = 0, n_samples = 200, channels = 4, ctx_channels = 2,
      size = 3;
  unsigned long long seed = 1;

  auto* fuse = app.add_subcommand("fuse", "Sum-fuse RGB and flow feature pyramids");
  fuse->add_option("--rgb", rgb, "comma-separated tensor files, finest level first")->required();
  fuse->add_option("--flow", flow, "comma-separated tensor files")->required();
  fuse->add_option("--out", out, "comma-separated output tensor files")->required();

  auto* flowviz = app.add_subcommand("flowviz", "Color-wheel encode a flow field");
  flowviz->add_option("--flow", flow, "flow tensor file (1,2,H,W)")->required();
  flowviz->add_option("--out", out, "output tensor file (1,3,H,W)")->required();

  auto* pseudo =
      app.add_subcommand("pseudolabel", "Relabel confident non-overlapping detections");
  pseudo->add_option("--dets", dets)->required();
  pseudo->add_option("--gt", gt)->required();
  pseudo->add_option("--out", out)->required();
  pseudo->add_option("--conf", conf, "confidence threshold");
  pseudo->add_option("--iou", iou_thr, "max IoU against ground truth");
  pseudo->add_option("--relabel-class", relabel_class, "inactive class id");

  auto* track = app.add_subcommand("track", "Link detections into tubelets");
  track->add_option("--dets", dets)->required();
  track->add_option("--config", config_path);
  track->add_option("--out", out)->required();

  auto* align = app.add_subcommand("align", "ROI-align tubes against two-rate features");
  align->add_option("--features", features, "slow.bin,fast.bin")->required();
  align->add_option("--tubes", tubes)->required();
  align->add_option("--mode", mode, "key or droi")->required();
  align->add_option("--out", out)->required();
  align->add_option("--scale", scale, "image-to-feature coordinate scale");
  align->add_option("--config", config_path);

  auto* classify_cmd =
      app.add_subcommand("classify", "Score agents with the interaction head");
  classify_cmd->add_option("--features", features, "stacked aligned agents (N,C,h,w)")
      ->required();
  classify_cmd->add_option("--context", context_path, "pooled clip context tensor");
  classify_cmd->add_option("--weights", weights_path)->required();
  classify_cmd->add_option("--out", out)->required();
  classify_cmd->add_option("--key-frame", key_frame);
  classify_cmd->add_option("--tubes", tubes, "tube records supplying track ids");
  classify_cmd->add_option("--config", config_path);

  auto* train = app.add_subcommand("train-toy", "Train the interaction head on a toy dataset");
  train->add_option("--data", data_dir)->required();
  train->add_option("--config", config_path);
  train->add_option("--out", out)->required();

  auto* toydata = app.add_subcommand("toy-data", "Write an interaction-task toy dataset");
  toydata->add_option("--out", out)->required();
  toydata->add_option("--samples", n_samples);
  toydata->add_option("--seed", seed);
  toydata->add_option("--channels", channels);
  toydata->add_option("--context-channels", ctx_channels);
  toydata->add_option("--size", size, "spatial side of the agent maps");

  auto* trim = app.add_subcommand("trim", "Trim scored tubes into action tracks");
  trim->add_option("--scored-tubes", tubes)->required();
  trim->add_option("--epsilon", epsilon);
  trim->add_option("--out", out)->required();

  auto* sync = app.add_subcommand("sync", "Time-sync detections to frame timestamps");
  sync->add_option("--frames", frames_path, "one timestamp per line, most recent first")
      ->required();
  sync->add_option("--dets", dets, "tracked detections jsonl")->required();
  sync->add_option("--out", out)->required();

  auto* conflict = app.add_subcommand("conflict", "Pedestrian conflict decision");
  conflict->add_option("--history", history_path)->required();
  conflict->add_option("--now", now)->required();
  conflict->add_option("--int-set", int_set, "comma-separated action names or ids");
  conflict->add_option("--window", window, "history window in seconds");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scenario to disk");
  simulate->add_option("--scenario", scenario_path)->required();
  simulate->add_option("--out", out)->required();

  auto* eval = app.add_subcommand("eval", "Frame or video mAP evaluation");
  eval->add_option("--pred", dets)->required();
  eval->add_option("--gt", gt)->required();
  eval->add_option("--mode", mode, "frame or video")->required();
  eval->add_option("--iou", eval_iou);
  eval->add_option("--report", report_path)->required();

  auto* run = app.add_subcommand("run", "End-to-end pipeline on a scenario");
  run->add_option("--scenario", scenario_path)->required();
  run->add_option("--config", config_path);
  run->add_option("--report", report_path)->required();
  run->add_option("--weights", weights_path, "pretrained weights (otherwise trains in-run)");
  run->add_option("--tracks-out", tracks_out);
  run->add_option("--save-weights", save_weights);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fuse->parsed()) return cmd_fuse(rgb, flow, out);
    if (flowviz->parsed()) return cmd_flowviz(flow, out);
    if (pseudo->parsed()) return cmd_pseudolabel(dets, gt, out, conf, iou_thr, relabel_class);
    if (track->parsed()) return cmd_track(dets, config_path, out);
    if (align->parsed()) return cmd_align(features, tubes, mode, out, scale, config_path);
    if (classify_cmd->parsed())
      return cmd_classify(features, context_path, weights_path, out, key_frame, tubes,
                          config_path);
    if (train->parsed()) return cmd_train_toy(data_dir, config_path, out);
    if (toydata->parsed())
      return cmd_toy_data(out, n_samples, seed, channels, ctx_channels, size);
    if (trim->parsed()) return cmd_trim(tubes, epsilon, out);
    if (sync->parsed()) return cmd_sync(frames_path, dets, out);
    if (conflict->parsed()) return cmd_conflict(history_path, now, int_set, window);
    if (simulate->parsed()) return cmd_simulate(scenario_path, out);
    if (eval->parsed()) return cmd_eval(dets, gt, mode, eval_iou, report_path);
    if (run->parsed())
      return cmd_run(scenario_path, config_path, report_path, weights_path, tracks_out,
                     save_weights);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
