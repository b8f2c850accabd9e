#pragma once

#include <string>
#include <vector>

namespace ralacs {

/// Road action vocabulary used by the synthetic scenarios and the conflict
/// decision CLI. Ids are positions in this list.
const std::vector<std::string>& action_names();

/// Name for an id; out-of-range ids format as "action<k>".
std::string action_name(int id);

/// Id for a name; throws std::invalid_argument for unknown names.
int action_id(const std::string& name);

inline constexpr int kActionBraking = 0;
inline constexpr int kActionTurLft = 1;
inline constexpr int kActionTurRht = 2;
inline constexpr int kActionXingLft = 3;
inline constexpr int kActionXingRht = 4;
inline constexpr int kActionWait2X = 5;
inline constexpr int kActionMov = 6;
inline constexpr int kActionMovAway = 7;
inline constexpr int kActionMovTow = 8;
inline constexpr int kActionStop = 9;

}  // namespace ralacs
