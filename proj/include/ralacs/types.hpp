#pragma once

#include <optional>
#include <vector>

#include "ralacs/geometry.hpp"
#include "ralacs/tensor.hpp"

namespace ralacs {

struct Detection {
  int class_id = 0;
  double confidence = 0.0;
  BoundingBox box;
  int frame_index = 0;
  double timestamp = 0.0;  // seconds

  void validate() const;
};

struct TrackedDetection {
  Detection detection;
  int track_id = 0;
};

/// How a tubelet slot was obtained.
enum class SlotOrigin { Observed, Interpolated };

/// An agent's track over a clip: one optional box per frame. Absent slots
/// mean the agent was occluded or missing at that frame.
struct Tubelet {
  int track_id = 0;
  int class_id = 0;
  int start_frame = 0;  // absolute frame of boxes[0]
  std::vector<std::optional<BoundingBox>> boxes;
  std::vector<SlotOrigin> origins;  // parallel to boxes; meaningful where present

  int length() const { return static_cast<int>(boxes.size()); }
  void validate() const;
};

/// Per-pixel displacement map between two consecutive frames (pixels/frame).
struct FlowField {
  int h = 0;
  int w = 0;
  std::vector<double> u;  // row-major h*w, horizontal
  std::vector<double> v;  // vertical

  FlowField() = default;
  FlowField(int h_, int w_, double fill_u = 0.0, double fill_v = 0.0);

  std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * w + x; }
  void validate() const;
};

/// Per-agent action confidences at a key frame; each score post-sigmoid.
struct ActionScores {
  int track_id = 0;
  int key_frame_index = 0;
  std::vector<double> scores;

  void validate() const;
};

/// A sliding window of frames with the tubelets present in its key frame.
struct Clip {
  std::vector<FeatureTensor> frames;  // l RGB images, (1,3,H,W) each
  std::vector<FlowField> flows;       // l-1, flows[i] between frames i and i+1
  int key_frame_index = 0;            // l/2
  std::vector<Tubelet> tubelets;      // boxes indexed by clip frame

  void validate() const;
};

}  // namespace ralacs
