#include "ralacs/types.hpp"

#include <cmath>
#include <stdexcept>

namespace ralacs {

void Detection::validate() const {
  box.validate();
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw std::invalid_argument("Detection: confidence outside [0,1]");
  if (!std::isfinite(timestamp)) throw std::invalid_argument("Detection: non-finite timestamp");
}

void Tubelet::validate() const {
  if (boxes.empty()) throw std::invalid_argument("Tubelet: empty slot list");
  if (!origins.empty() && origins.size() != boxes.size())
    throw std::invalid_argument("Tubelet: origins length mismatch");
  bool any = false;
  for (const auto& b : boxes) {
    if (b) {
      b->validate();
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("Tubelet: no present box");
}

FlowField::FlowField(int h_, int w_, double fill_u, double fill_v) : h(h_), w(w_) {
  if (h < 0 || w < 0) throw std::invalid_argument("FlowField: negative dimension");
  u.assign(static_cast<std::size_t>(h) * w, fill_u);
  v.assign(static_cast<std::size_t>(h) * w, fill_v);
}

void FlowField::validate() const {
  const std::size_t expect = static_cast<std::size_t>(h) * w;
  if (u.size() != expect || v.size() != expect)
    throw std::invalid_argument("FlowField: component length does not match dims");
  for (std::size_t i = 0; i < expect; ++i)
    if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
      throw std::invalid_argument("FlowField: non-finite value");
}

void ActionScores::validate() const {
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("ActionScores: score outside [0,1]");
}

void Clip::validate() const {
  const int l = static_cast<int>(frames.size());
  if (l == 0) throw std::invalid_argument("Clip: no frames");
  if (static_cast<int>(flows.size()) != l - 1)
    throw std::invalid_argument("Clip: expected l-1 flow fields");
  if (key_frame_index < 0 || key_frame_index >= l)
    throw std::invalid_argument("Clip: key frame outside clip");
  for (const auto& tube : tubelets) {
    tube.validate();
    const int slot = key_frame_index - tube.start_frame;
    if (slot < 0 || slot >= tube.length() || !tube.boxes[slot])
      throw std::invalid_argument("Clip: tubelet has no box at the key frame");
  }
}

}  // namespace ralacs
