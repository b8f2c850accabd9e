#pragma once

#include <string>
#include <vector>

#include "ralacs/types.hpp"

namespace ralacs {

/// An agent tube with one score vector per frame slot.
struct ScoredTube {
  Tubelet tubelet;
  std::vector<std::vector<double>> scores;  // parallel to tubelet.boxes

  void validate() const;
};

/// A contiguous single-action segment of an agent tube.
struct ActionTrack {
  int class_id = 0;
  int start_frame = 0;
  std::vector<std::optional<BoundingBox>> boxes;  // one per frame in the interval
  std::vector<double> scores;                     // parallel to boxes
  int track_id = -1;

  int end_frame() const { return start_frame + static_cast<int>(boxes.size()) - 1; }
  double mean_score() const;
  void validate() const;
};

std::string to_json_line(const ActionTrack& t);
ActionTrack action_track_from_json(const std::string& line);
std::vector<ActionTrack> read_tracks_jsonl(const std::string& path);
void write_tracks_jsonl(const std::vector<ActionTrack>& tracks, const std::string& path);

std::string to_json_line(const ScoredTube& t);
ScoredTube scored_tube_from_json(const std::string& line);
std::vector<ScoredTube> read_scored_tubes_jsonl(const std::string& path);
void write_scored_tubes_jsonl(const std::vector<ScoredTube>& tubes, const std::string& path);

/// Every maximal contiguous run of frames with s_ik >= epsilon becomes one
/// ActionTrack for class k; empty when no frame qualifies.
std::vector<ActionTrack> trim_tube(const ScoredTube& tube, int class_id, double epsilon);

/// Online variant: scores below epsilon are zeroed, others pass through.
std::vector<double> online_mask(const std::vector<double>& scores, double epsilon);

/// For each frame timestamp (most recent first) returns the detection closest
/// in time reachable by a monotone two-pointer scan over the (also most
/// recent first) detections.
std::vector<TrackedDetection> time_sync(const std::vector<double>& frame_timestamps,
                                        const std::vector<TrackedDetection>& bboxes);

}  // namespace ralacs
