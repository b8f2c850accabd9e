#include "ralacs/env_model.hpp"

#include <json.hpp>
#include <stdexcept>

#include "ralacs/actions.hpp"
#include "ralacs/io.hpp"

namespace ralacs {

using nlohmann::json;

ConflictDecisionSpec::ConflictDecisionSpec() {
  interference_set = {kActionStop, kActionWait2X};
}

std::string to_json_line(const ActionHistoryEntry& e) {
  return json{{"label", e.label}, {"stamp", e.stamp}}.dump();
}

ActionHistoryEntry history_entry_from_json(const std::string& line) {
  const json j = json::parse(line);
  ActionHistoryEntry e;
  if (j.at("label").is_string())
    e.label = action_id(j.at("label").get<std::string>());
  else
    e.label = j.at("label").get<int>();
  e.stamp = j.at("stamp").get<double>();
  return e;
}

std::vector<ActionHistoryEntry> read_history_jsonl(const std::string& path) {
  std::vector<ActionHistoryEntry> out;
  for (const auto& line : read_lines(path)) out.push_back(history_entry_from_json(line));
  return out;
}

void write_history_jsonl(const std::vector<ActionHistoryEntry>& entries,
                         const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(entries.size());
  for (const auto& e : entries) lines.push_back(to_json_line(e));
  write_lines(lines, path);
}

bool handle_pedestrian(const std::vector<ActionHistoryEntry>& history, double now,
                       const ConflictDecisionSpec& spec) {
  int n_interfere = 0;
  int n_total = 0;
  for (const auto& entry : history) {
    if (now - entry.stamp > spec.window) break;  // history is most recent first
    ++n_total;
    if (spec.interference_set.count(entry.label)) ++n_interfere;
  }
  if (n_total == 0) return false;  // no evidence, no conflict edge
  return static_cast<double>(n_interfere) / n_total > 0.5;
}

std::vector<ActionHistoryEntry> append_action(const std::vector<ActionHistoryEntry>& history,
                                              const ActionScores& scores, double now,
                                              double threshold) {
  scores.validate();
  int best = -1;
  double best_score = threshold;
  for (std::size_t i = 0; i < scores.scores.size(); ++i) {
    if (scores.scores[i] > best_score) {
      best_score = scores.scores[i];
      best = static_cast<int>(i);
    }
  }
  if (best < 0) return history;
  std::vector<ActionHistoryEntry> out;
  out.reserve(history.size() + 1);
  out.push_back({best, now});
  out.insert(out.end(), history.begin(), history.end());
  return out;
}

}  // namespace ralacs
