#include "ralacs/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "ralacs/geometry.hpp"

namespace ralacs {

namespace {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat47 = Eigen::Matrix<double, 4, 7>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

Vec4 box_to_measurement(const BoundingBox& b) {
  Vec4 z;
  z << b.cx(), b.cy(), b.area(), b.width() / b.height();
  return z;
}

BoundingBox measurement_to_box(double cx, double cy, double s, double r) {
  const double w = std::sqrt(std::max(s * r, 1e-12));
  const double h = s / w;
  return BoundingBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
}

Mat7 transition_matrix() {
  Mat7 f = Mat7::Identity();
  f(0, 4) = 1.0;
  f(1, 5) = 1.0;
  f(2, 6) = 1.0;
  return f;
}

Mat47 observation_matrix() {
  Mat47 h = Mat47::Zero();
  h(0, 0) = h(1, 1) = h(2, 2) = h(3, 3) = 1.0;
  return h;
}

Mat7 process_noise(const PipelineConfig& cfg) {
  Mat7 q = Mat7::Zero();
  for (int i = 0; i < 4; ++i) q(i, i) = cfg.kalman_process_noise_pos;
  for (int i = 4; i < 7; ++i) q(i, i) = cfg.kalman_process_noise_vel;
  return q;
}

Mat4 observation_noise(const PipelineConfig& cfg) {
  Mat4 r = Mat4::Zero();
  r(0, 0) = r(1, 1) = cfg.kalman_obs_noise_pos;
  r(2, 2) = r(3, 3) = cfg.kalman_obs_noise_size;
  return r;
}

/// KF measurement update only (no bookkeeping).
void kf_observe(KalmanTrack& track, const BoundingBox& box, const PipelineConfig& cfg) {
  const Mat47 h = observation_matrix();
  const Vec4 z = box_to_measurement(box);
  const Vec4 innovation = z - h * track.state;
  const Mat4 s = h * track.covariance * h.transpose() + observation_noise(cfg);
  const Eigen::Matrix<double, 7, 4> k = track.covariance * h.transpose() * s.inverse();
  track.state += k * innovation;
  track.covariance = (Mat7::Identity() - k * h) * track.covariance;
  track.state(2) = std::max(track.state(2), 1e-4);  // area > 0
  track.state(3) = std::max(track.state(3), 1e-4);  // aspect > 0
}

BoundingBox lerp_box(const BoundingBox& a, const BoundingBox& b, double t) {
  return BoundingBox(a.x1 + (b.x1 - a.x1) * t, a.y1 + (b.y1 - a.y1) * t,
                     a.x2 + (b.x2 - a.x2) * t, a.y2 + (b.y2 - a.y2) * t);
}

/// Momentum term: agreement between the track's recent motion direction and
/// the direction towards the candidate detection, scaled to [-1/2, 1/2].
double momentum_bonus(const KalmanTrack& track, const Detection& det) {
  if (!track.has_velocity || track.observation_history.empty()) return 0.0;
  const BoundingBox& prev = track.last_observation().box;
  Eigen::Vector2d dir(det.box.cx() - prev.cx(), det.box.cy() - prev.cy());
  const double len = dir.norm();
  if (len < 1e-12) return 0.0;
  dir /= len;
  const double cosang = std::clamp(dir.dot(track.velocity_dir), -1.0, 1.0);
  const double dtheta = std::acos(cosang);
  return (M_PI / 2.0 - std::abs(dtheta)) / M_PI;
}

constexpr double kForbiddenGain = -1.0;

}  // namespace

KalmanTrack make_track(const Detection& det, int track_id, const PipelineConfig& cfg) {
  (void)cfg;
  KalmanTrack track;
  track.track_id = track_id;
  track.class_id = det.class_id;
  track.state = Vec7::Zero();
  track.state.head<4>() = box_to_measurement(det.box);
  track.covariance = Mat7::Identity();
  for (int i = 0; i < 4; ++i) track.covariance(i, i) = 10.0;
  for (int i = 4; i < 7; ++i) track.covariance(i, i) = 1e4;
  track.frozen_state = track.state;
  track.frozen_covariance = track.covariance;
  return track;
}

BoundingBox predict(KalmanTrack& track, const PipelineConfig& cfg) {
  if (track.state(2) + track.state(6) <= 0.0) {
    track.state(6) = 0.0;
    track.degraded = true;
  }
  const Mat7 f = transition_matrix();
  track.state = f * track.state;
  track.covariance = f * track.covariance * f.transpose() + process_noise(cfg);
  return measurement_to_box(track.state(0), track.state(1), std::max(track.state(2), 1e-4),
                            std::max(track.state(3), 1e-4));
}

void update(KalmanTrack& track, const BoundingBox& box, int frame, const PipelineConfig& cfg) {
  kf_observe(track, box, cfg);

  if (!track.observation_history.empty()) {
    // direction from the observation delta_t frames back (nearest available)
    const ObservationEntry* anchor = nullptr;
    for (int dt = cfg.kalman_delta_t; dt >= 1 && !anchor; --dt)
      for (const auto& e : track.observation_history)
        if (e.frame == frame - dt) {
          anchor = &e;
          break;
        }
    if (!anchor) anchor = &track.last_observation();
    Eigen::Vector2d dir(box.cx() - anchor->box.cx(), box.cy() - anchor->box.cy());
    const double len = dir.norm();
    if (len > 1e-12) {
      track.velocity_dir = dir / len;
      track.has_velocity = true;
    }
  }

  track.observation_history.push_back({frame, box, SlotOrigin::Observed});
  track.last_observed_frame = frame;
  ++track.consecutive_hits;
  track.frozen_state = track.state;
  track.frozen_covariance = track.covariance;
}

std::vector<int> hungarian_max(const std::vector<double>& gain, int n, int m,
                               double min_gain) {
  std::vector<int> assignment(n, -1);
  if (n == 0 || m == 0) return assignment;

  // Pad to a square where every row/column can stay unmatched at cost 0;
  // forbidden pairs get a prohibitive cost and are filtered afterwards.
  const int s = n + m;
  const double big = 1e9;
  std::vector<double> a(static_cast<std::size_t>(s + 1) * (s + 1), 0.0);
  auto cost = [&](int i, int j) -> double& {
    return a[static_cast<std::size_t>(i) * (s + 1) + j];
  };
  for (int i = 1; i <= s; ++i)
    for (int j = 1; j <= s; ++j) {
      if (i <= n && j <= m) {
        const double g = gain[static_cast<std::size_t>(i - 1) * m + (j - 1)];
        cost(i, j) = g >= min_gain ? -g : big;
      } else {
        cost(i, j) = 0.0;
      }
    }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(s + 1, 0.0), v(s + 1, 0.0);
  std::vector<int> p(s + 1, 0), way(s + 1, 0);
  for (int i = 1; i <= s; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(s + 1, inf);
    std::vector<char> used(s + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= s; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= s; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= m; ++j) {
    const int i = p[j];
    if (i >= 1 && i <= n &&
        gain[static_cast<std::size_t>(i - 1) * m + (j - 1)] >= min_gain)
      assignment[i - 1] = j - 1;
  }
  return assignment;
}

AssociationResult associate(const std::vector<std::pair<int, BoundingBox>>& predictions,
                            const std::vector<Detection>& detections,
                            double iou_threshold) {
  const int n = static_cast<int>(predictions.size());
  const int m = static_cast<int>(detections.size());
  std::vector<double> gain(static_cast<std::size_t>(n) * m, kForbiddenGain);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double v = iou(predictions[i].second, detections[j].box);
      if (v >= iou_threshold) gain[static_cast<std::size_t>(i) * m + j] = v;
    }
  const std::vector<int> assignment = hungarian_max(gain, n, m, 0.0);

  AssociationResult result;
  std::vector<char> det_used(m, 0);
  for (int i = 0; i < n; ++i) {
    if (assignment[i] >= 0) {
      result.matches.emplace_back(predictions[i].first, assignment[i]);
      det_used[assignment[i]] = 1;
    } else {
      result.unmatched_tracks.push_back(predictions[i].first);
    }
  }
  for (int j = 0; j < m; ++j)
    if (!det_used[j]) result.unmatched_detections.push_back(j);
  return result;
}

std::vector<TrackedDetection> tracker_step(TrackerState& state,
                                           const std::vector<Detection>& frame_detections,
                                           int frame_index, const PipelineConfig& cfg) {
  if (frame_index <= state.last_frame)
    throw std::invalid_argument("tracker_step: frame_index must be strictly increasing");
  state.last_frame = frame_index;
  for (const auto& d : frame_detections)
    if (d.frame_index != frame_index)
      throw std::invalid_argument("tracker_step: detection from a different frame");

  // retire tracks whose unobserved span now exceeds delta_t missing frames
  for (auto& track : state.tracks)
    if (!track.retired && frame_index - track.last_observed_frame > cfg.kalman_delta_t + 1)
      track.retired = true;

  std::set<int> classes;
  for (const auto& d : frame_detections) classes.insert(d.class_id);
  for (const auto& t : state.tracks)
    if (!t.retired) classes.insert(t.class_id);

  std::vector<TrackedDetection> emitted;

  for (int cid : classes) {
    std::vector<int> det_idx;
    for (int j = 0; j < static_cast<int>(frame_detections.size()); ++j)
      if (frame_detections[j].class_id == cid) det_idx.push_back(j);
    std::vector<KalmanTrack*> tracks;
    for (auto& t : state.tracks)
      if (!t.retired && t.class_id == cid) tracks.push_back(&t);

    const int n = static_cast<int>(tracks.size());
    const int m = static_cast<int>(det_idx.size());

    std::vector<BoundingBox> predicted;
    predicted.reserve(n);
    for (auto* t : tracks) predicted.push_back(predict(*t, cfg));

    // gain: IoU gated by the association threshold, plus the momentum bonus
    std::vector<double> gain(static_cast<std::size_t>(n) * m, kForbiddenGain);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        const Detection& det = frame_detections[det_idx[j]];
        const double raw = iou(predicted[i], det.box);
        if (raw >= cfg.iou_assoc_threshold)
          gain[static_cast<std::size_t>(i) * m + j] =
              raw + cfg.kalman_inertia * momentum_bonus(*tracks[i], det);
      }
    const std::vector<int> assignment = hungarian_max(gain, n, m, 0.0);

    std::vector<char> det_used(m, 0);
    for (int i = 0; i < n; ++i) {
      const int j = assignment[i];
      if (j < 0) continue;
      det_used[j] = 1;
      KalmanTrack& track = *tracks[i];
      const Detection& det = frame_detections[det_idx[j]];
      const int gap = frame_index - track.last_observed_frame;
      if (gap >= 2) {
        // observation-centric re-update: rewind to the last observation and
        // replay a linear virtual trajectory across the gap
        track.state = track.frozen_state;
        track.covariance = track.frozen_covariance;
        const BoundingBox last_box = track.last_observation().box;
        for (int k = 1; k < gap; ++k) {
          const BoundingBox virtual_box = lerp_box(last_box, det.box,
                                                   static_cast<double>(k) / gap);
          predict(track, cfg);
          kf_observe(track, virtual_box, cfg);
          track.observation_history.push_back(
              {track.last_observed_frame + k, virtual_box, SlotOrigin::Interpolated});
        }
        predict(track, cfg);
      }
      update(track, det.box, frame_index, cfg);
      emitted.push_back({det, track.track_id});
    }

    // tentative chains: consecutive-frame, IoU-linked detection runs
    std::vector<int> chain_idx;
    for (int ci = 0; ci < static_cast<int>(state.chains.size()); ++ci)
      if (state.chains[ci].class_id == cid &&
          state.chains[ci].entries.back().first == frame_index - 1)
        chain_idx.push_back(ci);

    struct Cand {
      double iou_v;
      int chain;
      int det;
    };
    std::vector<Cand> cands;
    for (int ci : chain_idx)
      for (int j = 0; j < m; ++j) {
        if (det_used[j]) continue;
        const Detection& det = frame_detections[det_idx[j]];
        const double v = iou(state.chains[ci].entries.back().second.box, det.box);
        if (v >= cfg.iou_assoc_threshold) cands.push_back({v, ci, j});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.iou_v != b.iou_v) return a.iou_v > b.iou_v;
      if (a.chain != b.chain) return a.chain < b.chain;
      return a.det < b.det;
    });
    std::set<int> chain_taken;
    for (const auto& cand : cands) {
      if (chain_taken.count(cand.chain) || det_used[cand.det]) continue;
      chain_taken.insert(cand.chain);
      det_used[cand.det] = 1;
      TentativeChain& chain = state.chains[cand.chain];
      const Detection& det = frame_detections[det_idx[cand.det]];
      chain.entries.emplace_back(frame_index, det);
      if (chain.entries.size() >= 3) {
        // three overlapping detections in a row: promote to a real track
        KalmanTrack track = make_track(det, state.next_track_id++, cfg);
        for (const auto& [f, d] : chain.entries)
          track.observation_history.push_back({f, d.box, SlotOrigin::Observed});
        track.last_observed_frame = frame_index;
        track.consecutive_hits = static_cast<int>(chain.entries.size());
        state.tracks.push_back(std::move(track));
        emitted.push_back({det, state.tracks.back().track_id});
        chain.entries.clear();  // marks the chain consumed
      }
    }

    // leftover detections open new chains
    for (int j = 0; j < m; ++j) {
      if (det_used[j]) continue;
      TentativeChain chain;
      chain.class_id = cid;
      chain.entries.emplace_back(frame_index, frame_detections[det_idx[j]]);
      state.chains.push_back(std::move(chain));
    }
  }

  // drop consumed and stale chains (a chain must grow every frame)
  std::vector<TentativeChain> alive;
  for (auto& chain : state.chains)
    if (!chain.entries.empty() && chain.entries.back().first == frame_index)
      alive.push_back(std::move(chain));
  state.chains = std::move(alive);

  std::sort(emitted.begin(), emitted.end(),
            [](const TrackedDetection& a, const TrackedDetection& b) {
              return a.track_id < b.track_id;
            });
  return emitted;
}

namespace {

/// Slots of one track over [start, end] with gap interpolation; nullopt when
/// nothing lands in the range.
std::optional<Tubelet> track_tubelet(const KalmanTrack& track, int start, int end,
                                     const PipelineConfig& cfg) {
  const auto& hist = track.observation_history;
  if (hist.empty()) return std::nullopt;
  const int len = end - start + 1;

  std::vector<std::optional<BoundingBox>> boxes(len);
  std::vector<SlotOrigin> origins(len, SlotOrigin::Observed);
  auto place = [&](int frame, const BoundingBox& box, SlotOrigin origin) {
    if (frame < start || frame > end) return;
    const int slot = frame - start;
    if (!boxes[slot]) {
      boxes[slot] = box;
      origins[slot] = origin;
    }
  };

  for (const auto& e : hist) place(e.frame, e.box, e.origin);
  for (std::size_t i = 0; i + 1 < hist.size(); ++i) {
    const int f0 = hist[i].frame;
    const int f1 = hist[i + 1].frame;
    const int gap = f1 - f0;
    if (gap <= 1 || gap > cfg.interp_max_gap) continue;
    for (int f = f0 + 1; f < f1; ++f)
      place(f, lerp_box(hist[i].box, hist[i + 1].box, static_cast<double>(f - f0) / gap),
            SlotOrigin::Interpolated);
  }

  bool any = false;
  for (const auto& b : boxes) any = any || b.has_value();
  if (!any) return std::nullopt;

  Tubelet tube;
  tube.track_id = track.track_id;
  tube.class_id = track.class_id;
  tube.start_frame = start;
  tube.boxes = std::move(boxes);
  tube.origins = std::move(origins);
  return tube;
}

}  // namespace

std::vector<Tubelet> extract_tubelets(const TrackerState& state, int clip_start,
                                      int clip_end, int key_frame,
                                      const PipelineConfig& cfg) {
  if (clip_start > clip_end || key_frame < clip_start || key_frame > clip_end)
    throw std::invalid_argument("extract_tubelets: key frame outside clip range");
  std::vector<Tubelet> tubes;
  for (const auto& track : state.tracks) {
    auto tube = track_tubelet(track, clip_start, clip_end, cfg);
    if (!tube || !tube->boxes[key_frame - clip_start]) continue;
    tubes.push_back(std::move(*tube));
  }
  return tubes;
}

std::vector<Tubelet> extract_all_tubelets(const TrackerState& state, int start, int end,
                                          const PipelineConfig& cfg) {
  if (start > end) throw std::invalid_argument("extract_all_tubelets: empty range");
  std::vector<Tubelet> tubes;
  for (const auto& track : state.tracks) {
    auto tube = track_tubelet(track, start, end, cfg);
    if (tube) tubes.push_back(std::move(*tube));
  }
  return tubes;
}

}  // namespace ralacs
