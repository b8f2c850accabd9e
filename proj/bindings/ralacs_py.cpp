#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <optional>

#include "ralacs/actions.hpp"
#include "ralacs/config.hpp"
#include "ralacs/droi_align.hpp"
#include "ralacs/env_model.hpp"
#include "ralacs/eval.hpp"
#include "ralacs/flow_fusion.hpp"
#include "ralacs/interaction.hpp"
#include "ralacs/pipeline.hpp"
#include "ralacs/postprocess.hpp"
#include "ralacs/tracker.hpp"

namespace py = pybind11;
using namespace ralacs;

namespace {

using Box4 = std::array<double, 4>;

BoundingBox to_box(const Box4& b) { return BoundingBox(b[0], b[1], b[2], b[3]); }
Box4 from_box(const BoundingBox& b) { return {b.x1, b.y1, b.x2, b.y2}; }

FeatureTensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 4) throw std::invalid_argument("expected a rank-4 (T,C,H,W) array");
  FeatureTensor t(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                  static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(3)));
  std::copy(arr.data(), arr.data() + arr.size(), t.data.begin());
  return t;
}

py::array_t<double> from_tensor(const FeatureTensor& t) {
  py::array_t<double> arr({t.t, t.c, t.h, t.w});
  std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
  return arr;
}

Conv1x1Weights to_conv(const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
                       const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
  if (w.ndim() != 2 || b.ndim() != 1) throw std::invalid_argument("weights must be 2-D, bias 1-D");
  Conv1x1Weights out(static_cast<int>(w.shape(0)), static_cast<int>(w.shape(1)));
  std::copy(w.data(), w.data() + w.size(), out.w.begin());
  std::copy(b.data(), b.data() + b.size(), out.b.begin());
  return out;
}

FlowField to_flow(const py::array_t<double, py::array::c_style | py::array::forcecast>& u,
                  const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
  if (u.ndim() != 2 || v.ndim() != 2) throw std::invalid_argument("flow components must be 2-D");
  if (u.shape(0) != v.shape(0) || u.shape(1) != v.shape(1))
    throw std::invalid_argument("flow components must share one shape");
  FlowField f(static_cast<int>(u.shape(0)), static_cast<int>(u.shape(1)));
  std::copy(u.data(), u.data() + u.size(), f.u.begin());
  std::copy(v.data(), v.data() + v.size(), f.v.begin());
  return f;
}

Tubelet to_tubelet(int track_id, int class_id, int start_frame,
                   const std::vector<std::optional<Box4>>& boxes) {
  Tubelet t;
  t.track_id = track_id;
  t.class_id = class_id;
  t.start_frame = start_frame;
  for (const auto& b : boxes) {
    t.boxes.emplace_back(b ? std::optional<BoundingBox>(to_box(*b)) : std::nullopt);
    t.origins.push_back(SlotOrigin::Observed);
  }
  return t;
}

/// Stateful tracker facade for the bindings.
struct OnlineTracker {
  TrackerState state;
  PipelineConfig cfg;

  explicit OnlineTracker(const PipelineConfig& config) : cfg(config) { cfg.validate(); }

  std::vector<std::tuple<int, int, Box4>> step(
      int frame_index, const std::vector<std::tuple<int, double, Box4>>& detections) {
    std::vector<Detection> dets;
    for (const auto& [cls, conf, box] : detections) {
      Detection d;
      d.class_id = cls;
      d.confidence = conf;
      d.box = to_box(box);
      d.frame_index = frame_index;
      d.timestamp = frame_index;
      dets.push_back(d);
    }
    std::vector<std::tuple<int, int, Box4>> out;
    for (const auto& td : tracker_step(state, dets, frame_index, cfg))
      out.emplace_back(td.track_id, td.detection.class_id, from_box(td.detection.box));
    return out;
  }

  std::vector<std::tuple<int, int, int, std::vector<std::optional<Box4>>>> tubelets(
      int clip_start, int clip_end, int key_frame) const {
    std::vector<std::tuple<int, int, int, std::vector<std::optional<Box4>>>> out;
    for (const auto& tube : extract_tubelets(state, clip_start, clip_end, key_frame, cfg)) {
      std::vector<std::optional<Box4>> boxes;
      for (const auto& b : tube.boxes)
        boxes.emplace_back(b ? std::optional<Box4>(from_box(*b)) : std::nullopt);
      out.emplace_back(tube.track_id, tube.class_id, tube.start_frame, std::move(boxes));
    }
    return out;
  }
};

py::dict report_dict(const EvalReport& r) {
  py::dict out;
  out["mode"] = r.mode;
  out["iou_threshold"] = r.iou_threshold;
  out["mean_ap"] = r.mean_ap;
  py::list per_class;
  for (const auto& c : r.per_class) {
    py::dict entry;
    entry["class_id"] = c.class_id;
    entry["ap"] = c.ap;
    entry["num_gt"] = c.num_gt;
    entry["num_pred"] = c.num_pred;
    per_class.append(entry);
  }
  out["per_class"] = per_class;
  return out;
}

}  // namespace

PYBIND11_MODULE(_ralacs, m) {
  m.doc() = "RALACS road action recognition pipeline";

  m.def("action_names", &action_names);

  m.def(
      "iou", [](const Box4& a, const Box4& b) { return iou(to_box(a), to_box(b)); },
      py::arg("a"), py::arg("b"));

  m.def("softmax", &softmax, py::arg("values"));

  m.def(
      "bilinear_sample",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& feat, double x,
         double y, int channel) { return bilinear_sample(to_tensor(feat), x, y, channel); },
      py::arg("feat"), py::arg("x"), py::arg("y"), py::arg("channel") = 0);

  m.def(
      "upsample_nearest_2x",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& feat) {
        return from_tensor(upsample_nearest_2x(to_tensor(feat)));
      },
      py::arg("feat"));

  m.def(
      "conv1x1",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& feat,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return from_tensor(conv1x1(to_tensor(feat), to_conv(w, b)));
      },
      py::arg("feat"), py::arg("w"), py::arg("b"));

  m.def(
      "layer_norm",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& feat, double eps) {
        return from_tensor(layer_norm(to_tensor(feat), eps));
      },
      py::arg("feat"), py::arg("eps") = 1e-5);

  m.def(
      "temporal_avg_pool",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& feat) {
        return from_tensor(temporal_avg_pool(to_tensor(feat)));
      },
      py::arg("feat"));

  m.def(
      "flow_to_colorwheel",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& u,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
        return from_tensor(flow_to_colorwheel(to_flow(u, v)));
      },
      py::arg("u"), py::arg("v"));

  m.def(
      "fuse_fpn",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& rgb,
         const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& flow) {
        FeaturePyramid rp, fp;
        for (const auto& level : rgb) rp.levels.push_back(to_tensor(level));
        for (const auto& level : flow) fp.levels.push_back(to_tensor(level));
        const FeaturePyramid fused = fuse_fpn(rp, fp);
        std::vector<py::array_t<double>> out;
        for (const auto& level : fused.levels) out.push_back(from_tensor(level));
        return out;
      },
      py::arg("rgb"), py::arg("flow"));

  m.def(
      "synthetic_feature_provider",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image, int levels,
         int channels, std::uint64_t seed) {
        const FeaturePyramid pyr = synthetic_feature_provider(to_tensor(image), levels, channels, seed);
        std::vector<py::array_t<double>> out;
        for (const auto& level : pyr.levels) out.push_back(from_tensor(level));
        return out;
      },
      py::arg("image"), py::arg("levels"), py::arg("channels"), py::arg("seed"));

  m.def(
      "generate_pseudo_labels",
      [](const std::vector<std::pair<double, Box4>>& dets, const std::vector<Box4>& gt_boxes,
         double conf_threshold, double iou_threshold, int relabel_class) {
        std::vector<Detection> dets_c, gt_c;
        for (const auto& [conf, box] : dets) {
          Detection d;
          d.class_id = 1;
          d.confidence = conf;
          d.box = to_box(box);
          dets_c.push_back(d);
        }
        for (const auto& box : gt_boxes) {
          Detection d;
          d.confidence = 1.0;
          d.box = to_box(box);
          gt_c.push_back(d);
        }
        PseudoLabelRule rule;
        rule.conf_threshold = conf_threshold;
        rule.iou_threshold = iou_threshold;
        rule.relabel_class = relabel_class;
        std::vector<std::pair<double, Box4>> out;
        for (const auto& d : generate_pseudo_labels(dets_c, gt_c, rule))
          out.emplace_back(d.confidence, from_box(d.box));
        return out;
      },
      py::arg("detections"), py::arg("ground_truth"), py::arg("conf_threshold") = 0.9,
      py::arg("iou_threshold") = 0.2, py::arg("relabel_class") = 0);

  m.def(
      "roi_align",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& feat,
         const Box4& box, int out_h, int out_w, int samples, double offset) {
        RoiAlignSpec spec;
        spec.out_h = out_h;
        spec.out_w = out_w;
        spec.samples_per_bin = samples;
        spec.coordinate_offset = offset;
        return from_tensor(roi_align(to_tensor(feat), to_box(box), spec));
      },
      py::arg("feat"), py::arg("box"), py::arg("out_h") = 7, py::arg("out_w") = 7,
      py::arg("samples") = 2, py::arg("offset") = 0.0);

  m.def(
      "droi_align",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& slow,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& fast,
         const std::vector<std::optional<Box4>>& boxes, int out_h, int out_w, int samples,
         double offset) {
        TwoRateFeatures feats;
        feats.slow = to_tensor(slow);
        feats.fast = to_tensor(fast);
        RoiAlignSpec spec;
        spec.out_h = out_h;
        spec.out_w = out_w;
        spec.samples_per_bin = samples;
        spec.coordinate_offset = offset;
        const Tubelet tube = to_tubelet(0, 0, 0, boxes);
        std::vector<int> slot_map(tube.length());
        for (int i = 0; i < tube.length(); ++i) slot_map[i] = i;
        return from_tensor(droi_align(feats, tube, slot_map, spec));
      },
      py::arg("slow"), py::arg("fast"), py::arg("boxes"), py::arg("out_h") = 7,
      py::arg("out_w") = 7, py::arg("samples") = 2, py::arg("offset") = 0.0);

  m.def(
      "keyframe_align",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& slow,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& fast,
         const Box4& key_box, int out_h, int out_w, int samples, double offset) {
        TwoRateFeatures feats;
        feats.slow = to_tensor(slow);
        feats.fast = to_tensor(fast);
        RoiAlignSpec spec;
        spec.out_h = out_h;
        spec.out_w = out_w;
        spec.samples_per_bin = samples;
        spec.coordinate_offset = offset;
        return from_tensor(keyframe_align(feats, to_box(key_box), spec));
      },
      py::arg("slow"), py::arg("fast"), py::arg("key_box"), py::arg("out_h") = 7,
      py::arg("out_w") = 7, py::arg("samples") = 2, py::arg("offset") = 0.0);

  m.def("slow_align_indices", &slow_align_indices, py::arg("alpha"), py::arg("t_fast"));

  m.def(
      "hr2o_forward",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& feats,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& wq,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& bq,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& wk,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& bk,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& wv,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& bv,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& wout,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& bout) {
        std::vector<AgentFeature> agents;
        for (std::size_t i = 0; i < feats.size(); ++i) {
          AgentFeature a;
          a.feat = to_tensor(feats[i]);
          a.track_id = static_cast<int>(i);
          agents.push_back(std::move(a));
        }
        Hr2oWeights w;
        w.w_q = to_conv(wq, bq);
        w.w_k = to_conv(wk, bk);
        w.w_v = to_conv(wv, bv);
        w.w_out = to_conv(wout, bout);
        w.d = w.w_q.c_out;
        std::vector<py::array_t<double>> out;
        for (const auto& f : hr2o_forward(agents, w, 1.0, 0)) out.push_back(from_tensor(f));
        return out;
      },
      py::arg("agent_feats"), py::arg("wq"), py::arg("bq"), py::arg("wk"), py::arg("bk"),
      py::arg("wv"), py::arg("bv"), py::arg("wout"), py::arg("bout"));

  m.def(
      "classify",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& feat,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        HeadWeights head;
        head.n_actions = static_cast<int>(w.shape(0));
        head.in_dim = static_cast<int>(w.shape(1));
        head.w.assign(w.data(), w.data() + w.size());
        head.b.assign(b.data(), b.data() + b.size());
        return classify(to_tensor(feat), head).scores;
      },
      py::arg("feat"), py::arg("w"), py::arg("b"));

  m.def(
      "focal_loss",
      [](const std::vector<double>& scores, const std::vector<int>& targets, double gamma,
         double alpha) {
        ActionScores s;
        s.scores = scores;
        return focal_loss(s, targets, {gamma, alpha});
      },
      py::arg("scores"), py::arg("targets"), py::arg("gamma") = 2.0, py::arg("alpha") = 0.25);

  m.def(
      "trim_tube",
      [](int start_frame, const std::vector<std::optional<Box4>>& boxes,
         const std::vector<std::vector<double>>& scores, int class_id, double epsilon) {
        ScoredTube tube;
        tube.tubelet = to_tubelet(0, 0, start_frame, boxes);
        tube.scores = scores;
        py::list out;
        for (const auto& track : trim_tube(tube, class_id, epsilon)) {
          py::dict entry;
          entry["class_id"] = track.class_id;
          entry["start_frame"] = track.start_frame;
          entry["end_frame"] = track.end_frame();
          entry["scores"] = track.scores;
          out.append(entry);
        }
        return out;
      },
      py::arg("start_frame"), py::arg("boxes"), py::arg("scores"), py::arg("class_id"),
      py::arg("epsilon") = 0.001);

  m.def("online_mask", &online_mask, py::arg("scores"), py::arg("epsilon") = 0.001);

  m.def(
      "time_sync",
      [](const std::vector<double>& frame_timestamps, const std::vector<double>& det_timestamps) {
        std::vector<TrackedDetection> dets;
        for (std::size_t i = 0; i < det_timestamps.size(); ++i) {
          TrackedDetection td;
          td.detection.box = BoundingBox(0, 0, 1, 1);
          td.detection.timestamp = det_timestamps[i];
          td.track_id = static_cast<int>(i);
          dets.push_back(td);
        }
        std::vector<int> indices;
        for (const auto& m_ : time_sync(frame_timestamps, dets)) indices.push_back(m_.track_id);
        return indices;
      },
      py::arg("frame_timestamps"), py::arg("det_timestamps"),
      "Returns, per frame timestamp, the index of the matched detection");

  m.def(
      "handle_pedestrian",
      [](const std::vector<std::pair<int, double>>& history, double now,
         const std::set<int>& interference_set, double window) {
        std::vector<ActionHistoryEntry> entries;
        for (const auto& [label, stamp] : history) entries.push_back({label, stamp});
        ConflictDecisionSpec spec;
        if (!interference_set.empty()) spec.interference_set = interference_set;
        spec.window = window;
        return handle_pedestrian(entries, now, spec);
      },
      py::arg("history"), py::arg("now"), py::arg("interference_set") = std::set<int>{},
      py::arg("window") = 5.0);

  m.def(
      "append_action",
      [](const std::vector<std::pair<int, double>>& history, const std::vector<double>& scores,
         double now, double threshold) {
        std::vector<ActionHistoryEntry> entries;
        for (const auto& [label, stamp] : history) entries.push_back({label, stamp});
        ActionScores s;
        s.scores = scores;
        std::vector<std::pair<int, double>> out;
        for (const auto& e : append_action(entries, s, now, threshold))
          out.emplace_back(e.label, e.stamp);
        return out;
      },
      py::arg("history"), py::arg("scores"), py::arg("now"), py::arg("threshold") = 0.5);

  m.def(
      "frame_map",
      [](const std::vector<std::tuple<int, int, double, Box4>>& preds,
         const std::vector<std::tuple<int, int, Box4>>& gts, double iou_thr) {
        std::vector<ScoredBox> p, g;
        for (const auto& [frame, cls, score, box] : preds)
          p.push_back({frame, cls, score, to_box(box)});
        for (const auto& [frame, cls, box] : gts) g.push_back({frame, cls, 1.0, to_box(box)});
        return report_dict(frame_map(p, g, iou_thr));
      },
      py::arg("predictions"), py::arg("ground_truth"), py::arg("iou_threshold") = 0.5);

  m.def(
      "video_map",
      [](const std::vector<std::tuple<int, int, std::vector<std::optional<Box4>>,
                                      std::vector<double>>>& preds,
         const std::vector<std::tuple<int, int, std::vector<std::optional<Box4>>,
                                      std::vector<double>>>& gts,
         double tube_iou_thr) {
        auto convert = [](const auto& rows) {
          std::vector<ActionTrack> out;
          for (const auto& [cls, start, boxes, scores] : rows) {
            ActionTrack t;
            t.class_id = cls;
            t.start_frame = start;
            for (const auto& b : boxes)
              t.boxes.emplace_back(b ? std::optional<BoundingBox>(to_box(*b)) : std::nullopt);
            t.scores = scores;
            out.push_back(std::move(t));
          }
          return out;
        };
        return report_dict(video_map(convert(preds), convert(gts), tube_iou_thr));
      },
      py::arg("predictions"), py::arg("ground_truth"), py::arg("tube_iou_threshold") = 0.2);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("clip_length", &PipelineConfig::clip_length)
      .def_readwrite("slow_frames", &PipelineConfig::slow_frames)
      .def_readwrite("iou_assoc_threshold", &PipelineConfig::iou_assoc_threshold)
      .def_readwrite("kalman_delta_t", &PipelineConfig::kalman_delta_t)
      .def_readwrite("kalman_inertia", &PipelineConfig::kalman_inertia)
      .def_readwrite("trim_epsilon", &PipelineConfig::trim_epsilon)
      .def_readwrite("feature_levels", &PipelineConfig::feature_levels)
      .def_readwrite("feature_channels", &PipelineConfig::feature_channels)
      .def_readwrite("reduced_channels", &PipelineConfig::reduced_channels)
      .def_readwrite("attention_dim", &PipelineConfig::attention_dim)
      .def_readwrite("roi_out", &PipelineConfig::roi_out)
      .def_readwrite("train_epochs", &PipelineConfig::train_epochs)
      .def_readwrite("train_stride", &PipelineConfig::train_stride)
      .def_readwrite("learning_rate", &PipelineConfig::learning_rate)
      .def_readwrite("dropout_rate", &PipelineConfig::dropout_rate);

  py::class_<OnlineTracker>(m, "OnlineTracker")
      .def(py::init<const PipelineConfig&>(), py::arg("config") = PipelineConfig{})
      .def("step", &OnlineTracker::step, py::arg("frame_index"), py::arg("detections"),
           "detections: list of (class_id, confidence, (x1,y1,x2,y2)); returns "
           "(track_id, class_id, box) per confirmed detection")
      .def("tubelets", &OnlineTracker::tubelets, py::arg("clip_start"), py::arg("clip_end"),
           py::arg("key_frame"));

  m.def(
      "run_scenario",
      [](const std::string& scenario_text, const PipelineConfig& cfg) {
        const Scenario scenario = parse_scenario(scenario_text);
        const ModelWeights weights = train_from_scenario(scenario, cfg);
        const PipelineResult result = run_pipeline(scenario, cfg, weights);
        py::dict out;
        out["frame"] = report_dict(result.frame_report);
        out["video"] = report_dict(result.video_report);
        out["first_key_frame"] = result.first_key_frame;
        out["last_key_frame"] = result.last_key_frame;
        out["num_action_tracks"] = result.tracks.size();
        return out;
      },
      py::arg("scenario_text"), py::arg("config") = PipelineConfig{},
      "Trains on the scenario's ground truth, runs the pipeline, returns reports");
}
