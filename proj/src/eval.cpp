#include "ralacs/eval.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <stdexcept>

#include "ralacs/io.hpp"

namespace ralacs {

using nlohmann::json;

std::string to_json_line(const ScoredBox& b, bool with_score) {
  json j{{"frame_index", b.frame_index},
         {"class_id", b.class_id},
         {"box", json{{"x1", b.box.x1}, {"y1", b.box.y1}, {"x2", b.box.x2}, {"y2", b.box.y2}}}};
  if (with_score) j["score"] = b.score;
  return j.dump();
}

ScoredBox scored_box_from_json(const std::string& line) {
  const json j = json::parse(line);
  ScoredBox b;
  b.frame_index = j.at("frame_index").get<int>();
  b.class_id = j.at("class_id").get<int>();
  b.score = j.value("score", 1.0);
  const json& box = j.at("box");
  b.box = BoundingBox(box.at("x1").get<double>(), box.at("y1").get<double>(),
                      box.at("x2").get<double>(), box.at("y2").get<double>());
  return b;
}

std::vector<ScoredBox> read_scored_boxes_jsonl(const std::string& path) {
  std::vector<ScoredBox> out;
  for (const auto& line : read_lines(path)) out.push_back(scored_box_from_json(line));
  return out;
}

void write_scored_boxes_jsonl(const std::vector<ScoredBox>& boxes, const std::string& path,
                              bool with_score) {
  std::vector<std::string> lines;
  lines.reserve(boxes.size());
  for (const auto& b : boxes) lines.push_back(to_json_line(b, with_score));
  write_lines(lines, path);
}

std::string report_to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& c : r.per_class)
    per_class.push_back(json{{"class_id", c.class_id},
                             {"ap", c.ap},
                             {"num_gt", c.num_gt},
                             {"num_pred", c.num_pred}});
  return json{{"mode", r.mode},
              {"iou_threshold", r.iou_threshold},
              {"per_class", per_class},
              {"mean_ap", r.mean_ap},
              {"num_classes", r.per_class.size()}}
      .dump(2);
}

void write_report(const EvalReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << report_to_json(r) << "\n";
}

namespace {

/// Area under the all-point interpolated precision/recall curve.
/// tp_flags are in descending score order.
double average_precision(const std::vector<char>& tp_flags, int num_gt) {
  if (num_gt == 0) return 0.0;
  const int n = static_cast<int>(tp_flags.size());
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (int i = 0; i < n; ++i) {
    tp += tp_flags[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / (i + 1);
    recall[i] = static_cast<double>(tp) / num_gt;
  }
  // interpolated precision: running max from the right
  for (int i = n - 2; i >= 0; --i) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (int i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

struct PredRef {
  double score;
  int index;
};

/// Greedy score-ordered matching shared by both evaluators. overlap(p, g)
/// yields the IoU between prediction p and ground truth g of one class.
template <typename Overlap>
double class_ap(const std::vector<PredRef>& preds, int num_gt, double iou_thr,
                Overlap&& overlap) {
  std::vector<PredRef> order = preds;
  std::stable_sort(order.begin(), order.end(), [](const PredRef& a, const PredRef& b) {
    return a.score > b.score;
  });
  std::vector<char> gt_used(num_gt, 0);
  std::vector<char> tp_flags;
  tp_flags.reserve(order.size());
  for (const auto& p : order) {
    int best_g = -1;
    double best_iou = iou_thr;
    for (int g = 0; g < num_gt; ++g) {
      if (gt_used[g]) continue;
      const double v = overlap(p.index, g);
      if (v > best_iou || (v == best_iou && best_g < 0 && v >= iou_thr)) {
        best_iou = v;
        best_g = g;
      }
    }
    if (best_g >= 0) {
      gt_used[best_g] = 1;
      tp_flags.push_back(1);
    } else {
      tp_flags.push_back(0);
    }
  }
  return average_precision(tp_flags, num_gt);
}

}  // namespace

EvalReport frame_map(const std::vector<ScoredBox>& predictions,
                     const std::vector<ScoredBox>& ground_truth, double iou_thr) {
  std::set<int> classes;
  for (const auto& g : ground_truth) classes.insert(g.class_id);

  EvalReport report;
  report.mode = "frame";
  report.iou_threshold = iou_thr;
  double sum_ap = 0.0;
  for (int cid : classes) {
    std::vector<const ScoredBox*> gts;
    for (const auto& g : ground_truth)
      if (g.class_id == cid) gts.push_back(&g);
    std::vector<const ScoredBox*> preds;
    std::vector<PredRef> refs;
    for (const auto& p : predictions)
      if (p.class_id == cid) {
        refs.push_back({p.score, static_cast<int>(preds.size())});
        preds.push_back(&p);
      }
    const double ap = class_ap(refs, static_cast<int>(gts.size()), iou_thr,
                               [&](int pi, int gi) {
                                 if (preds[pi]->frame_index != gts[gi]->frame_index) return -1.0;
                                 return iou(preds[pi]->box, gts[gi]->box);
                               });
    report.per_class.push_back(
        {cid, ap, static_cast<int>(gts.size()), static_cast<int>(preds.size())});
    sum_ap += ap;
  }
  report.mean_ap = report.per_class.empty() ? 0.0 : sum_ap / report.per_class.size();
  return report;
}

double tube_iou(const ActionTrack& a, const ActionTrack& b) {
  a.validate();
  b.validate();
  const int start = std::min(a.start_frame, b.start_frame);
  const int end = std::max(a.end_frame(), b.end_frame());
  double sum = 0.0;
  int frames = 0;
  for (int f = start; f <= end; ++f) {
    const bool in_a = f >= a.start_frame && f <= a.end_frame();
    const bool in_b = f >= b.start_frame && f <= b.end_frame();
    if (!in_a && !in_b) continue;
    ++frames;
    if (!in_a || !in_b) continue;  // absent box contributes 0
    const auto& box_a = a.boxes[f - a.start_frame];
    const auto& box_b = b.boxes[f - b.start_frame];
    if (box_a && box_b) sum += iou(*box_a, *box_b);
  }
  return frames == 0 ? 0.0 : sum / frames;
}

EvalReport video_map(const std::vector<ActionTrack>& predictions,
                     const std::vector<ActionTrack>& ground_truth, double tube_iou_thr) {
  std::set<int> classes;
  for (const auto& g : ground_truth) classes.insert(g.class_id);

  EvalReport report;
  report.mode = "video";
  report.iou_threshold = tube_iou_thr;
  double sum_ap = 0.0;
  for (int cid : classes) {
    std::vector<const ActionTrack*> gts;
    for (const auto& g : ground_truth)
      if (g.class_id == cid) gts.push_back(&g);
    std::vector<const ActionTrack*> preds;
    std::vector<PredRef> refs;
    for (const auto& p : predictions)
      if (p.class_id == cid) {
        refs.push_back({p.mean_score(), static_cast<int>(preds.size())});
        preds.push_back(&p);
      }
    const double ap = class_ap(refs, static_cast<int>(gts.size()), tube_iou_thr,
                               [&](int pi, int gi) { return tube_iou(*preds[pi], *gts[gi]); });
    report.per_class.push_back(
        {cid, ap, static_cast<int>(gts.size()), static_cast<int>(preds.size())});
    sum_ap += ap;
  }
  report.mean_ap = report.per_class.empty() ? 0.0 : sum_ap / report.per_class.size();
  return report;
}

}  // namespace ralacs
