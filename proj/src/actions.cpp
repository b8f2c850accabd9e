#include "ralacs/actions.hpp"

#include <stdexcept>

namespace ralacs {

const std::vector<std::string>& action_names() {
  static const std::vector<std::string> names = {
      "Braking", "TurLft", "TurRht", "XingLft", "XingRht",
      "Wait2X",  "Mov",    "MovAway", "MovTow", "Stop"};
  return names;
}

std::string action_name(int id) {
  const auto& names = action_names();
  if (id >= 0 && id < static_cast<int>(names.size())) return names[id];
  return "action" + std::to_string(id);
}

int action_id(const std::string& name) {
  const auto& names = action_names();
  for (int i = 0; i < static_cast<int>(names.size()); ++i)
    if (names[i] == name) return i;
  throw std::invalid_argument("unknown action name: " + name);
}

}  // namespace ralacs
