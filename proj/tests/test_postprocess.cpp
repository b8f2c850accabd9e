#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ralacs/postprocess.hpp"
#include "ralacs/rng.hpp"

using namespace ralacs;

namespace {

ScoredTube tube_with_scores(const std::vector<double>& class0_scores, int n_actions = 2,
                            int start_frame = 0) {
  ScoredTube tube;
  tube.tubelet.track_id = 1;
  tube.tubelet.class_id = 1;
  tube.tubelet.start_frame = start_frame;
  for (std::size_t i = 0; i < class0_scores.size(); ++i) {
    tube.tubelet.boxes.emplace_back(
        BoundingBox(0.0 + i, 0.0, 4.0 + i, 4.0));
    tube.tubelet.origins.push_back(SlotOrigin::Observed);
    std::vector<double> row(n_actions, 0.0);
    row[0] = class0_scores[i];
    tube.scores.push_back(std::move(row));
  }
  return tube;
}

TrackedDetection det_at(double ts, int track_id = 0) {
  TrackedDetection td;
  td.detection.box = BoundingBox(0, 0, 1, 1);
  td.detection.confidence = 0.9;
  td.detection.timestamp = ts;
  td.track_id = track_id;
  return td;
}

}  // namespace

TEST_CASE("trim_tube isolates the confident middle segment") {
  const ScoredTube tube = tube_with_scores({0.0005, 0.6, 0.7, 0.0002});
  const auto tracks = trim_tube(tube, 0, 0.001);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].start_frame == 1);
  CHECK(tracks[0].end_frame() == 2);
  CHECK(tracks[0].scores == std::vector<double>{0.6, 0.7});
}

TEST_CASE("trim_tube keeps the whole tube when everything clears epsilon") {
  const ScoredTube tube = tube_with_scores({0.4, 0.5, 0.6});
  const auto tracks = trim_tube(tube, 0, 0.001);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].start_frame == 0);
  CHECK(tracks[0].end_frame() == 2);
}

TEST_CASE("trim_tube emits one track per maximal run") {
  const ScoredTube tube = tube_with_scores({0.5, 0.0001, 0.5});
  const auto tracks = trim_tube(tube, 0, 0.001);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].start_frame == 0);
  CHECK(tracks[0].end_frame() == 0);
  CHECK(tracks[1].start_frame == 2);
  CHECK(tracks[1].end_frame() == 2);
}

TEST_CASE("trim_tube: no qualifying frame yields no tracks; offsets are absolute") {
  CHECK(trim_tube(tube_with_scores({0.0001, 0.0002}), 0, 0.001).empty());
  const auto tracks = trim_tube(tube_with_scores({0.9, 0.9}, 2, 40), 0, 0.001);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].start_frame == 40);
}

TEST_CASE("trim_tube partition property on random score sequences") {
  Rng rng(71);
  const double eps = 0.001;
  for (int trial = 0; trial < 1000; ++trial) {
    const int len = 1 + rng.uniform_int(0, 19);
    std::vector<double> scores(len);
    for (auto& s : scores)
      s = rng.uniform() < 0.4 ? rng.uniform(0.0, eps) : rng.uniform(eps, 1.0);
    const ScoredTube tube = tube_with_scores(scores);
    const auto tracks = trim_tube(tube, 0, eps);

    std::vector<char> covered(len, 0);
    for (const auto& track : tracks) {
      CHECK(!track.boxes.empty());
      for (int f = track.start_frame; f <= track.end_frame(); ++f) {
        CHECK(!covered[f]);  // disjoint
        covered[f] = 1;
        CHECK(track.scores[f - track.start_frame] >= eps);
      }
    }
    for (int f = 0; f < len; ++f) CHECK((covered[f] != 0) == (scores[f] >= eps));
    // maximality: adjacent frames outside every run are below epsilon
    for (const auto& track : tracks) {
      if (track.start_frame > 0) CHECK(scores[track.start_frame - 1] < eps);
      if (track.end_frame() + 1 < len) CHECK(scores[track.end_frame() + 1] < eps);
    }
  }
}

TEST_CASE("trim_tube with epsilon below the minimum returns the whole tube") {
  Rng rng(73);
  std::vector<double> scores(10);
  for (auto& s : scores) s = rng.uniform(0.25, 1.0);
  const auto tracks = trim_tube(tube_with_scores(scores), 0, 0.01);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].boxes.size() == 10);
}

TEST_CASE("online_mask thresholds scores and is idempotent") {
  CHECK(online_mask({0.5, 0.9}, 0.001) == std::vector<double>{0.5, 0.9});
  CHECK(online_mask({1e-5, 1e-4}, 0.001) == std::vector<double>{0.0, 0.0});

  Rng rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> scores(12);
    for (auto& s : scores) s = rng.uniform();
    const auto once = online_mask(scores, 0.3);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      CHECK(once[i] <= scores[i]);  // never increases
      CHECK((scores[i] < 0.3 ? once[i] == 0.0 : once[i] == scores[i]));
    }
    CHECK(online_mask(once, 0.3) == once);
  }
}

TEST_CASE("time_sync identity matching for identical timestamp lists") {
  const std::vector<double> ts = {5.0, 4.0, 3.0};
  std::vector<TrackedDetection> dets = {det_at(5.0, 0), det_at(4.0, 1), det_at(3.0, 2)};
  const auto matched = time_sync(ts, dets);
  REQUIRE(matched.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(matched[i].track_id == i);
}

TEST_CASE("time_sync matches the worked two-detection example") {
  const std::vector<double> ts = {10.0, 8.0, 6.0};
  std::vector<TrackedDetection> dets = {det_at(9.9, 0), det_at(7.0, 1)};
  const auto matched = time_sync(ts, dets);
  REQUIRE(matched.size() == 3);
  CHECK(matched[0].detection.timestamp == doctest::Approx(9.9));
  CHECK(matched[1].detection.timestamp == doctest::Approx(7.0));
  CHECK(matched[2].detection.timestamp == doctest::Approx(7.0));
}

TEST_CASE("time_sync with a single detection matches every frame to it") {
  const auto matched = time_sync({9.0, 5.0, 1.0}, {det_at(4.0, 3)});
  REQUIRE(matched.size() == 3);
  for (const auto& m : matched) CHECK(m.track_id == 3);
}

TEST_CASE("time_sync equals brute-force nearest matching on monotone instances") {
  Rng rng(83);
  for (int trial = 0; trial < 500; ++trial) {
    const int n_frames = 1 + rng.uniform_int(0, 10);
    const int n_dets = 1 + rng.uniform_int(0, 10);
    std::vector<double> ts(n_frames);
    for (auto& t : ts) t = rng.uniform(0.0, 50.0);
    std::sort(ts.rbegin(), ts.rend());
    std::vector<TrackedDetection> dets;
    std::vector<double> det_ts(n_dets);
    for (auto& t : det_ts) t = rng.uniform(0.0, 50.0);
    std::sort(det_ts.rbegin(), det_ts.rend());
    for (int i = 0; i < n_dets; ++i) dets.push_back(det_at(det_ts[i], i));

    const auto matched = time_sync(ts, dets);
    double total = 0.0;
    int prev_index = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      total += std::abs(ts[i] - matched[i].detection.timestamp);
      // matches are monotone in detection index
      CHECK(matched[i].track_id >= prev_index);
      prev_index = matched[i].track_id;
    }
    double best = 0.0;
    for (double t : ts) {
      double nearest = std::abs(t - det_ts[0]);
      for (double d : det_ts) nearest = std::min(nearest, std::abs(t - d));
      best += nearest;
    }
    CHECK(total == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("time_sync validates its inputs") {
  CHECK_THROWS_AS(time_sync({1.0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(time_sync({}, {det_at(1.0)}), std::invalid_argument);
  CHECK_THROWS_AS(time_sync({1.0, 2.0}, {det_at(1.0)}), std::invalid_argument);
  CHECK_THROWS_AS(time_sync({2.0, 1.0}, {det_at(1.0), det_at(2.0)}), std::invalid_argument);
}

TEST_CASE("scored tube and action track records round-trip") {
  const ScoredTube tube = tube_with_scores({0.25, 0.5}, 3, 7);
  const ScoredTube tube2 = scored_tube_from_json(to_json_line(tube));
  CHECK(tube2.tubelet.start_frame == 7);
  CHECK(tube2.scores == tube.scores);

  ActionTrack track;
  track.class_id = 4;
  track.start_frame = 11;
  track.boxes = {BoundingBox(0, 0, 2, 2), std::nullopt};
  track.scores = {0.5, 0.25};
  track.track_id = 2;
  const ActionTrack track2 = action_track_from_json(to_json_line(track));
  CHECK(track2.class_id == 4);
  CHECK(track2.start_frame == 11);
  CHECK(!track2.boxes[1]);
  CHECK(track2.scores == track.scores);
  CHECK(track2.mean_score() == doctest::Approx(0.375));
}
