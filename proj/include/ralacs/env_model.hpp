#pragma once

#include <set>
#include <string>
#include <vector>

#include "ralacs/types.hpp"

namespace ralacs {

struct ActionHistoryEntry {
  int label = -1;      // action id
  double stamp = 0.0;  // seconds
};

struct ConflictDecisionSpec {
  std::set<int> interference_set;  // default {Stop, Wait2X}
  double window = 5.0;             // seconds
  // ratio threshold is fixed at 0.5 (strict inequality)

  ConflictDecisionSpec();
};

std::string to_json_line(const ActionHistoryEntry& e);
ActionHistoryEntry history_entry_from_json(const std::string& line);
std::vector<ActionHistoryEntry> read_history_jsonl(const std::string& path);
void write_history_jsonl(const std::vector<ActionHistoryEntry>& entries, const std::string& path);

/// True iff, over the entries no older than `window`, strictly more than half
/// carry an interference label. History must be sorted most recent first;
/// an empty window decides false.
bool handle_pedestrian(const std::vector<ActionHistoryEntry>& history, double now,
                       const ConflictDecisionSpec& spec);

/// Appends (argmax class, now) to the front of the history when the top score
/// is strictly over the threshold; ties break to the lowest class id.
std::vector<ActionHistoryEntry> append_action(const std::vector<ActionHistoryEntry>& history,
                                              const ActionScores& scores, double now,
                                              double threshold = 0.5);

}  // namespace ralacs
