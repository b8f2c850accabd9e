#include "ralacs/pipeline.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "ralacs/droi_align.hpp"
#include "ralacs/flow_fusion.hpp"
#include "ralacs/postprocess.hpp"
#include "ralacs/tracker.hpp"

namespace ralacs {

namespace {

constexpr std::uint64_t kRgbProviderSeed = 0x52414c41u;   // fixed backbone seeds
constexpr std::uint64_t kFlowProviderSeed = 0x43534f46u;

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("pipeline stage '") + name + "': " + e.what());
  }
}

struct FrameFeatures {
  std::vector<FeatureTensor> fast;     // per frame, fused finest level (stride 2)
  std::vector<FeatureTensor> context;  // per frame, pooled fused top level (roi x roi)
  double box_scale = 0.5;              // image -> finest-level coordinates
};

FrameFeatures build_features(const GeneratedScenario& gen, const PipelineConfig& cfg) {
  FrameFeatures out;
  const int n = static_cast<int>(gen.frames.size());
  out.fast.reserve(n);
  out.context.reserve(n);
  for (int f = 0; f < n; ++f) {
    const FeaturePyramid rgb = synthetic_feature_provider(
        gen.frames[f], cfg.feature_levels, cfg.feature_channels, kRgbProviderSeed);
    FlowField flow;
    if (f > 0)
      flow = gen.flows[f - 1];
    else
      flow = FlowField(gen.frames[f].h, gen.frames[f].w);
    const FeaturePyramid flow_pyr = synthetic_feature_provider(
        flow_to_colorwheel(flow), cfg.feature_levels, cfg.feature_channels, kFlowProviderSeed);
    FeaturePyramid fused = fuse_fpn(rgb, flow_pyr);
    out.context.push_back(
        adaptive_spatial_avg_pool(fused.levels.back(), cfg.roi_out, cfg.roi_out));
    out.fast.push_back(std::move(fused.levels.front()));
  }
  return out;
}

TwoRateFeatures window_features(const FrameFeatures& feats, int start, int l, int alpha) {
  const FeatureTensor& proto = feats.fast[start];
  TwoRateFeatures out;
  out.fast = FeatureTensor(l, proto.c, proto.h, proto.w);
  const std::size_t slice = proto.data.size();
  for (int i = 0; i < l; ++i)
    std::copy(feats.fast[start + i].data.begin(), feats.fast[start + i].data.end(),
              out.fast.data.begin() + static_cast<std::ptrdiff_t>(slice) * i);
  const int t_slow = l / alpha;
  out.slow = FeatureTensor(t_slow, proto.c, proto.h, proto.w);
  for (int k = 0; k < t_slow; ++k) {
    const int frame = start + (k + 1) * alpha - 1;
    std::copy(feats.fast[frame].data.begin(), feats.fast[frame].data.end(),
              out.slow.data.begin() + static_cast<std::ptrdiff_t>(slice) * k);
  }
  return out;
}

FeatureTensor window_context(const FrameFeatures& feats, int start, int l) {
  std::vector<FeatureTensor> slices(feats.context.begin() + start,
                                    feats.context.begin() + start + l);
  return temporal_avg_pool(slices);
}

Tubelet scale_tube(const Tubelet& tube, double scale) {
  Tubelet out = tube;
  for (auto& box : out.boxes)
    if (box) *box = BoundingBox(box->x1 * scale, box->y1 * scale, box->x2 * scale,
                                box->y2 * scale);
  return out;
}

RoiAlignSpec roi_spec(const PipelineConfig& cfg) {
  RoiAlignSpec spec;
  spec.out_h = cfg.roi_out;
  spec.out_w = cfg.roi_out;
  spec.samples_per_bin = cfg.roi_samples;
  spec.coordinate_offset = cfg.roi_offset;
  return spec;
}

std::vector<int> identity_slot_map(int l) {
  std::vector<int> map(l);
  for (int i = 0; i < l; ++i) map[i] = i;
  return map;
}

}  // namespace

ModelWeights train_from_scenario(const Scenario& scenario, const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.hr2o_depth != 1)
    throw std::runtime_error(
        "train_from_scenario: training supports hr2o_depth=1 only (deeper stacks are "
        "inference-side)");
  const GeneratedScenario gen = stage("generate", [&] { return generate(scenario); });
  const FrameFeatures feats = stage("features", [&] { return build_features(gen, cfg); });

  const int l = cfg.clip_length;
  const int alpha = l / cfg.slow_frames;
  const RoiAlignSpec spec = roi_spec(cfg);
  const auto slot_map = identity_slot_map(l);

  std::vector<ToySample> samples = stage("training-samples", [&] {
    std::vector<ToySample> out;
    for (int start = 0; start + l <= scenario.duration; start += std::max(1, cfg.train_stride)) {
      const int key = start + l / 2;
      const TwoRateFeatures two_rate = window_features(feats, start, l, alpha);
      ToySample sample;
      sample.context = window_context(feats, start, l);
      for (std::size_t ai = 0; ai < scenario.agents.size(); ++ai) {
        const auto& agent = scenario.agents[ai];
        if (!agent.active) continue;
        const AgentPose key_pose = agent_pose(agent, key);
        if (!key_pose.present || key_pose.action < 0) continue;
        Tubelet window_tube;
        window_tube.track_id = static_cast<int>(ai);
        window_tube.class_id = agent.class_id;
        window_tube.start_frame = start;
        window_tube.boxes.resize(l);
        for (int i = 0; i < l; ++i) {
          const AgentPose pose = agent_pose(agent, start + i);
          if (pose.present) window_tube.boxes[i] = pose.box;
        }
        window_tube.origins.assign(l, SlotOrigin::Observed);
        const FeatureTensor roi = droi_align(
            two_rate, scale_tube(window_tube, feats.box_scale), slot_map, spec);
        std::vector<int> target(cfg.n_actions, 0);
        target[key_pose.action] = 1;
        sample.agent_rois.push_back(roi);
        sample.targets.push_back(std::move(target));
        sample.class_ids.push_back(agent.class_id);
        sample.track_ids.push_back(static_cast<int>(ai));
      }
      if (!sample.agent_rois.empty()) out.push_back(std::move(sample));
    }
    return out;
  });
  if (samples.empty())
    throw std::runtime_error("train_from_scenario: scenario yields no training clips");

  return stage("train", [&] {
    const int c_agent = 2 * cfg.feature_channels;
    TrainConfig tcfg;
    tcfg.learning_rate = cfg.learning_rate;
    tcfg.momentum = cfg.train_momentum;
    tcfg.weight_decay = cfg.weight_decay;
    tcfg.epochs = cfg.train_epochs;
    tcfg.seed = cfg.train_seed;
    tcfg.attention_enabled = true;
    tcfg.dropout_keep = 1.0 - cfg.dropout_rate;
    tcfg.focal = {cfg.focal_gamma, cfg.focal_alpha};
    tcfg.layer_norm_eps = cfg.layer_norm_eps;
    tcfg.layer_norm_gain = cfg.layer_norm_gain;
    tcfg.layer_norm_bias = cfg.layer_norm_bias;
    ModelWeights init = init_model_weights(c_agent, cfg.feature_channels, cfg.reduced_channels,
                                           cfg.attention_dim, cfg.roi_out, cfg.roi_out,
                                           cfg.n_actions, cfg.train_seed);
    return train_toy(samples, tcfg, std::move(init)).weights;
  });
}

PipelineResult run_pipeline(const Scenario& scenario, const PipelineConfig& cfg,
                            const ModelWeights& weights) {
  cfg.validate();
  weights.validate();
  const GeneratedScenario gen = stage("generate", [&] { return generate(scenario); });
  const FrameFeatures feats = stage("features", [&] { return build_features(gen, cfg); });

  // track on active-agent detections only
  TrackerState tracker_state;
  stage("track", [&] {
    std::map<int, std::vector<Detection>> by_frame;
    for (const auto& det : gen.detections)
      if (det.class_id != cfg.inactive_class) by_frame[det.frame_index].push_back(det);
    for (int f = 0; f < scenario.duration; ++f) {
      auto it = by_frame.find(f);
      static const std::vector<Detection> empty;
      tracker_step(tracker_state, it == by_frame.end() ? empty : it->second, f, cfg);
    }
    return 0;
  });

  const int l = cfg.clip_length;
  const int alpha = l / cfg.slow_frames;
  const RoiAlignSpec spec = roi_spec(cfg);
  const auto slot_map = identity_slot_map(l);

  struct KeyScore {
    std::vector<double> scores;
    BoundingBox box;
  };
  // per track: key frame -> scores and key-frame box (image coordinates)
  std::map<int, std::map<int, KeyScore>> per_track;
  std::map<int, int> track_class;

  PipelineResult result;
  result.first_key_frame = l / 2;
  result.last_key_frame = scenario.duration - l + l / 2;

  stage("classify", [&] {
    for (int start = 0; start + l <= scenario.duration; ++start) {
      const int key = start + l / 2;
      std::vector<Tubelet> tubes =
          extract_tubelets(tracker_state, start, start + l - 1, key, cfg);
      if (tubes.empty()) continue;
      const TwoRateFeatures two_rate = window_features(feats, start, l, alpha);
      const FeatureTensor context = window_context(feats, start, l);

      std::vector<AgentFeature> agents;
      std::vector<BoundingBox> key_boxes;
      for (const auto& tube : tubes) {
        const FeatureTensor roi =
            droi_align(two_rate, scale_tube(tube, feats.box_scale), slot_map, spec);
        AgentFeature agent;
        agent.feat = agent_context_reduce(roi, context, weights.reduce);
        agent.track_id = tube.track_id;
        agent.class_id = tube.class_id;
        agents.push_back(std::move(agent));
        key_boxes.push_back(*tube.boxes[key - start]);
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
      for (std::size_t i = 0; i < agents.size(); ++i) {
        const ActionScores scores =
            classify(outs[i], weights.head, agents[i].track_id, key);
        per_track[agents[i].track_id][key] = {scores.scores, key_boxes[i]};
        track_class[agents[i].track_id] = agents[i].class_id;
      }
    }
    return 0;
  });

  stage("post", [&] {
    for (const auto& [track_id, keyed] : per_track) {
      const int k0 = keyed.begin()->first;
      const int k1 = keyed.rbegin()->first;
      ScoredTube tube;
      tube.tubelet.track_id = track_id;
      tube.tubelet.class_id = track_class[track_id];
      tube.tubelet.start_frame = k0;
      tube.tubelet.boxes.resize(k1 - k0 + 1);
      tube.tubelet.origins.assign(k1 - k0 + 1, SlotOrigin::Observed);
      tube.scores.assign(k1 - k0 + 1, std::vector<double>(cfg.n_actions, 0.0));
      for (const auto& [key, ks] : keyed) {
        tube.tubelet.boxes[key - k0] = ks.box;
        tube.scores[key - k0] = ks.scores;

        const std::vector<double> masked = online_mask(ks.scores, cfg.trim_epsilon);
        for (int a = 0; a < cfg.n_actions; ++a)
          if (masked[a] > 0.0)
            result.frame_predictions.push_back({key, a, masked[a], ks.box});
      }
      for (int a = 0; a < cfg.n_actions; ++a) {
        std::vector<ActionTrack> trimmed = trim_tube(tube, a, cfg.trim_epsilon);
        result.tracks.insert(result.tracks.end(), trimmed.begin(), trimmed.end());
      }
    }
    return 0;
  });

  stage("evaluate", [&] {
    std::vector<ScoredBox> gt_frames;
    for (const auto& g : gen.gt_boxes)
      if (g.frame_index >= result.first_key_frame && g.frame_index <= result.last_key_frame)
        gt_frames.push_back(g);
    result.frame_report = frame_map(result.frame_predictions, gt_frames, 0.5);

    std::vector<ActionTrack> gt_tracks;
    for (const auto& track : gen.gt_tracks) {
      const int start = std::max(track.start_frame, result.first_key_frame);
      const int end = std::min(track.end_frame(), result.last_key_frame);
      if (start > end) continue;
      ActionTrack clipped;
      clipped.class_id = track.class_id;
      clipped.track_id = track.track_id;
      clipped.start_frame = start;
      for (int f = start; f <= end; ++f) {
        clipped.boxes.push_back(track.boxes[f - track.start_frame]);
        clipped.scores.push_back(track.scores[f - track.start_frame]);
      }
      gt_tracks.push_back(std::move(clipped));
    }
    result.video_report = video_map(result.tracks, gt_tracks, 0.2);
    return 0;
  });

  return result;
}

}  // namespace ralacs
