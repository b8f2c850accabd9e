#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ralacs/tensor.hpp"
#include "ralacs/types.hpp"

namespace ralacs {

// ---- binary tensor container -------------------------------------------
// 8-byte magic "RLCTNSR1", four little-endian u32 dims (T,C,H,W), then
// row-major little-endian IEEE-754 f32 values.

void write_tensor(const FeatureTensor& t, const std::string& path);
FeatureTensor read_tensor(const std::string& path);

/// Flow fields use the same container with T=1, C=2 (u then v).
void write_flow(const FlowField& f, const std::string& path);
FlowField read_flow(const std::string& path);

// ---- weights container ---------------------------------------------------
// Sequence of named sections: u32 name length, name bytes, then one tensor
// block in the container format above. Matrices are stored as (1,1,rows,cols),
// vectors as (1,1,1,n).

using NamedTensors = std::vector<std::pair<std::string, FeatureTensor>>;

void write_named_tensors(const NamedTensors& sections, const std::string& path);
NamedTensors read_named_tensors(const std::string& path);

// ---- line-delimited JSON records -----------------------------------------
// One JSON object per line, UTF-8, floats with full round-trip precision.

std::string to_json_line(const Detection& d);
std::string to_json_line(const TrackedDetection& d);
std::string to_json_line(const Tubelet& t);
std::string to_json_line(const ActionScores& s);

Detection detection_from_json(const std::string& line);
TrackedDetection tracked_detection_from_json(const std::string& line);
Tubelet tubelet_from_json(const std::string& line);
ActionScores action_scores_from_json(const std::string& line);

std::vector<Detection> read_detections_jsonl(const std::string& path);
void write_detections_jsonl(const std::vector<Detection>& dets, const std::string& path);

std::vector<TrackedDetection> read_tracked_jsonl(const std::string& path);
void write_tracked_jsonl(const std::vector<TrackedDetection>& dets, const std::string& path);

std::vector<Tubelet> read_tubelets_jsonl(const std::string& path);
void write_tubelets_jsonl(const std::vector<Tubelet>& tubes, const std::string& path);

std::vector<ActionScores> read_scores_jsonl(const std::string& path);
void write_scores_jsonl(const std::vector<ActionScores>& scores, const std::string& path);

/// One timestamp per line, most recent first.
std::vector<double> read_timestamps(const std::string& path);

// Shared plumbing for the other record readers/writers.
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::vector<std::string>& lines, const std::string& path);

}  // namespace ralacs
