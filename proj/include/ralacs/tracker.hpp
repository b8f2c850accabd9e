#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "ralacs/config.hpp"
#include "ralacs/types.hpp"

namespace ralacs {

struct ObservationEntry {
  int frame = 0;
  BoundingBox box;
  SlotOrigin origin = SlotOrigin::Observed;
};

/// Constant-velocity Kalman track over (cx, cy, area, aspect) with velocities
/// on the first three components.
struct KalmanTrack {
  Eigen::Matrix<double, 7, 1> state;       // cx, cy, s, r, vcx, vcy, vs
  Eigen::Matrix<double, 7, 7> covariance;
  int track_id = -1;
  int class_id = 0;
  int last_observed_frame = -1;
  int consecutive_hits = 0;
  bool retired = false;
  bool degraded = false;  // set when a predict had to clamp the area velocity
  std::vector<ObservationEntry> observation_history;

  // observation-centric momentum: unit direction of recent observed motion
  Eigen::Vector2d velocity_dir = Eigen::Vector2d::Zero();
  bool has_velocity = false;

  // snapshot at the last observation, restored for re-update over gaps
  Eigen::Matrix<double, 7, 1> frozen_state;
  Eigen::Matrix<double, 7, 7> frozen_covariance;

  const ObservationEntry& last_observation() const { return observation_history.back(); }
};

struct TentativeChain {
  int class_id = 0;
  std::vector<std::pair<int, Detection>> entries;  // consecutive frames
};

struct TrackerState {
  std::vector<KalmanTrack> tracks;  // every promoted track, in creation order
  std::vector<TentativeChain> chains;
  int next_track_id = 0;
  int last_frame = -1;
};

struct AssociationResult {
  std::vector<std::pair<int, int>> matches;  // (track_id, detection index)
  std::vector<int> unmatched_tracks;         // track_ids
  std::vector<int> unmatched_detections;     // indices
};

KalmanTrack make_track(const Detection& det, int track_id, const PipelineConfig& cfg);

/// Advances the track one frame under constant velocity and returns the box
/// reconstructed from the predicted state. A prediction that would drive the
/// area non-positive clamps the area velocity and flags the track degraded.
BoundingBox predict(KalmanTrack& track, const PipelineConfig& cfg);

/// Observation update; maintains the momentum direction and the frozen
/// snapshot used for re-update.
void update(KalmanTrack& track, const BoundingBox& box, int frame, const PipelineConfig& cfg);

/// Optimal one-to-one assignment maximizing total IoU (Hungarian method);
/// pairs below iou_threshold stay unmatched.
AssociationResult associate(const std::vector<std::pair<int, BoundingBox>>& predictions,
                            const std::vector<Detection>& detections,
                            double iou_threshold);

/// Maximum-weight assignment on an n x m gain matrix (row-major). Entries
/// below `min_gain` are treated as forbidden. Returns column index per row,
/// -1 for unassigned.
std::vector<int> hungarian_max(const std::vector<double>& gain, int n, int m,
                               double min_gain);

/// One tracking step per class: predict, associate (IoU + momentum bonus),
/// re-update over gaps, chain births after three overlapping frames in a row,
/// retirement after more than delta_t unobserved frames. frame_index must be
/// strictly increasing across calls.
std::vector<TrackedDetection> tracker_step(TrackerState& state,
                                           const std::vector<Detection>& frame_detections,
                                           int frame_index, const PipelineConfig& cfg);

/// One tubelet per track present at key_frame, with boxes covering
/// [clip_start, clip_end] and gaps of <= interp_max_gap frames linearly
/// interpolated.
std::vector<Tubelet> extract_tubelets(const TrackerState& state, int clip_start,
                                      int clip_end, int key_frame,
                                      const PipelineConfig& cfg);

/// Full-stream variant without the key-frame requirement (one tube per track
/// that was observed anywhere in the range).
std::vector<Tubelet> extract_all_tubelets(const TrackerState& state, int start, int end,
                                          const PipelineConfig& cfg);

}  // namespace ralacs
