#include "ralacs/postprocess.hpp"

#include <cmath>
#include <json.hpp>
#include <numeric>
#include <stdexcept>

#include "ralacs/io.hpp"

namespace ralacs {

using nlohmann::json;

void ScoredTube::validate() const {
  tubelet.validate();
  if (scores.size() != tubelet.boxes.size())
    throw std::invalid_argument("ScoredTube: scores not parallel to slots");
  for (const auto& row : scores) {
    if (row.size() != scores.front().size())
      throw std::invalid_argument("ScoredTube: ragged score rows");
    for (double s : row)
      if (!(s >= 0.0 && s <= 1.0))
        throw std::invalid_argument("ScoredTube: score outside [0,1]");
  }
}

double ActionTrack::mean_score() const {
  if (scores.empty()) return 0.0;
  return std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
}

void ActionTrack::validate() const {
  if (boxes.empty()) throw std::invalid_argument("ActionTrack: empty interval");
  if (scores.size() != boxes.size())
    throw std::invalid_argument("ActionTrack: scores not parallel to boxes");
  for (const auto& b : boxes)
    if (b) b->validate();
}

namespace {

json opt_box_to_json(const std::optional<BoundingBox>& b) {
  if (!b) return nullptr;
  return json{{"x1", b->x1}, {"y1", b->y1}, {"x2", b->x2}, {"y2", b->y2}};
}

std::optional<BoundingBox> opt_box_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return BoundingBox(j.at("x1").get<double>(), j.at("y1").get<double>(),
                     j.at("x2").get<double>(), j.at("y2").get<double>());
}

}  // namespace

std::string to_json_line(const ActionTrack& t) {
  json boxes = json::array();
  for (const auto& b : t.boxes) boxes.push_back(opt_box_to_json(b));
  return json{{"class_id", t.class_id},
              {"start_frame", t.start_frame},
              {"boxes", boxes},
              {"scores", t.scores},
              {"track_id", t.track_id}}
      .dump();
}

ActionTrack action_track_from_json(const std::string& line) {
  const json j = json::parse(line);
  ActionTrack t;
  t.class_id = j.at("class_id").get<int>();
  t.start_frame = j.at("start_frame").get<int>();
  for (const auto& b : j.at("boxes")) t.boxes.push_back(opt_box_from_json(b));
  t.scores = j.at("scores").get<std::vector<double>>();
  t.track_id = j.value("track_id", -1);
  return t;
}

std::vector<ActionTrack> read_tracks_jsonl(const std::string& path) {
  std::vector<ActionTrack> out;
  for (const auto& line : read_lines(path)) out.push_back(action_track_from_json(line));
  return out;
}

void write_tracks_jsonl(const std::vector<ActionTrack>& tracks, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(tracks.size());
  for (const auto& t : tracks) lines.push_back(to_json_line(t));
  write_lines(lines, path);
}

std::string to_json_line(const ScoredTube& t) {
  return json{{"tubelet", json::parse(to_json_line(t.tubelet))}, {"scores", t.scores}}.dump();
}

ScoredTube scored_tube_from_json(const std::string& line) {
  const json j = json::parse(line);
  ScoredTube t;
  t.tubelet = tubelet_from_json(j.at("tubelet").dump());
  t.scores = j.at("scores").get<std::vector<std::vector<double>>>();
  return t;
}

std::vector<ScoredTube> read_scored_tubes_jsonl(const std::string& path) {
  std::vector<ScoredTube> out;
  for (const auto& line : read_lines(path)) out.push_back(scored_tube_from_json(line));
  return out;
}

void write_scored_tubes_jsonl(const std::vector<ScoredTube>& tubes, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(tubes.size());
  for (const auto& t : tubes) lines.push_back(to_json_line(t));
  write_lines(lines, path);
}

std::vector<ActionTrack> trim_tube(const ScoredTube& tube, int class_id, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("trim_tube: epsilon must be > 0");
  tube.validate();
  const int len = static_cast<int>(tube.scores.size());
  const int n_actions = len > 0 ? static_cast<int>(tube.scores.front().size()) : 0;
  if (class_id < 0 || class_id >= n_actions)
    throw std::invalid_argument("trim_tube: class out of range");

  std::vector<ActionTrack> tracks;
  int run_start = -1;
  auto flush = [&](int end_exclusive) {
    if (run_start < 0) return;
    ActionTrack track;
    track.class_id = class_id;
    track.track_id = tube.tubelet.track_id;
    track.start_frame = tube.tubelet.start_frame + run_start;
    for (int i = run_start; i < end_exclusive; ++i) {
      track.boxes.push_back(tube.tubelet.boxes[i]);
      track.scores.push_back(tube.scores[i][class_id]);
    }
    tracks.push_back(std::move(track));
    run_start = -1;
  };
  for (int i = 0; i < len; ++i) {
    if (tube.scores[i][class_id] >= epsilon) {
      if (run_start < 0) run_start = i;
    } else {
      flush(i);
    }
  }
  flush(len);
  return tracks;
}

std::vector<double> online_mask(const std::vector<double>& scores, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("online_mask: epsilon must be > 0");
  std::vector<double> out = scores;
  for (double& s : out)
    if (s < epsilon) s = 0.0;
  return out;
}

std::vector<TrackedDetection> time_sync(const std::vector<double>& frame_timestamps,
                                        const std::vector<TrackedDetection>& bboxes) {
  if (bboxes.empty()) throw std::invalid_argument("time_sync: empty detection list");
  if (frame_timestamps.empty()) throw std::invalid_argument("time_sync: empty timestamp list");
  for (std::size_t i = 1; i < frame_timestamps.size(); ++i)
    if (frame_timestamps[i] > frame_timestamps[i - 1])
      throw std::invalid_argument("time_sync: timestamps not sorted most recent first");
  for (std::size_t i = 1; i < bboxes.size(); ++i)
    if (bboxes[i].detection.timestamp > bboxes[i - 1].detection.timestamp)
      throw std::invalid_argument("time_sync: detections not sorted most recent first");

  std::vector<TrackedDetection> matched;
  matched.reserve(frame_timestamps.size());
  std::size_t match_i = 0;
  for (double s : frame_timestamps) {
    while (match_i + 1 < bboxes.size() &&
           std::abs(s - bboxes[match_i].detection.timestamp) >=
               std::abs(s - bboxes[match_i + 1].detection.timestamp))
      ++match_i;
    matched.push_back(bboxes[match_i]);
  }
  return matched;
}

}  // namespace ralacs
