#include "ralacs/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace ralacs {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'R', 'L', 'C', 'T', 'N', 'S', 'R', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("tensor file: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void write_tensor_stream(const FeatureTensor& t, std::ostream& out) {
  out.write(kMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(t.t));
  put_u32(out, static_cast<std::uint32_t>(t.c));
  put_u32(out, static_cast<std::uint32_t>(t.h));
  put_u32(out, static_cast<std::uint32_t>(t.w));
  for (double v : t.data) put_f32(out, static_cast<float>(v));
}

FeatureTensor read_tensor_stream(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("tensor file: bad magic");
  const int t = static_cast<int>(get_u32(in));
  const int c = static_cast<int>(get_u32(in));
  const int h = static_cast<int>(get_u32(in));
  const int w = static_cast<int>(get_u32(in));
  FeatureTensor out(t, c, h, w);
  for (auto& v : out.data) v = static_cast<double>(get_f32(in));
  if (!in) throw std::runtime_error("tensor file: truncated data");
  return out;
}

json box_to_json(const BoundingBox& b) {
  return json{{"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}};
}

BoundingBox box_from_json(const json& j) {
  return BoundingBox(j.at("x1").get<double>(), j.at("y1").get<double>(),
                     j.at("x2").get<double>(), j.at("y2").get<double>());
}

json detection_to_json(const Detection& d) {
  return json{{"class_id", d.class_id},
              {"confidence", d.confidence},
              {"box", box_to_json(d.box)},
              {"frame_index", d.frame_index},
              {"timestamp", d.timestamp}};
}

Detection detection_from_json_obj(const json& j) {
  Detection d;
  d.class_id = j.at("class_id").get<int>();
  d.confidence = j.at("confidence").get<double>();
  d.box = box_from_json(j.at("box"));
  d.frame_index = j.at("frame_index").get<int>();
  d.timestamp = j.at("timestamp").get<double>();
  return d;
}

}  // namespace

void write_tensor(const FeatureTensor& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_tensor_stream(t, f);
}

FeatureTensor read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_tensor_stream(f);
}

void write_flow(const FlowField& flow, const std::string& path) {
  FeatureTensor t(1, 2, flow.h, flow.w);
  for (int y = 0; y < flow.h; ++y)
    for (int x = 0; x < flow.w; ++x) {
      t.at(0, 0, y, x) = flow.u[flow.index(y, x)];
      t.at(0, 1, y, x) = flow.v[flow.index(y, x)];
    }
  write_tensor(t, path);
}

FlowField read_flow(const std::string& path) {
  const FeatureTensor t = read_tensor(path);
  if (t.t != 1 || t.c != 2) throw std::runtime_error("flow file: expected dims (1,2,H,W)");
  FlowField flow(t.h, t.w);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x) {
      flow.u[flow.index(y, x)] = t.at(0, 0, y, x);
      flow.v[flow.index(y, x)] = t.at(0, 1, y, x);
    }
  return flow;
}

void write_named_tensors(const NamedTensors& sections, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& [name, tensor] : sections) {
    put_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor_stream(tensor, f);
  }
}

NamedTensors read_named_tensors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  NamedTensors out;
  while (f.peek() != EOF) {
    const std::uint32_t len = get_u32(f);
    std::string name(len, '\0');
    f.read(name.data(), len);
    if (!f) throw std::runtime_error("weights file: truncated section name");
    out.emplace_back(std::move(name), read_tensor_stream(f));
  }
  return out;
}

std::string to_json_line(const Detection& d) { return detection_to_json(d).dump(); }

std::string to_json_line(const TrackedDetection& d) {
  return json{{"detection", detection_to_json(d.detection)}, {"track_id", d.track_id}}.dump();
}

std::string to_json_line(const Tubelet& t) {
  json boxes = json::array();
  json origins = json::array();
  for (std::size_t i = 0; i < t.boxes.size(); ++i) {
    if (t.boxes[i]) {
      boxes.push_back(box_to_json(*t.boxes[i]));
      const SlotOrigin o = i < t.origins.size() ? t.origins[i] : SlotOrigin::Observed;
      origins.push_back(o == SlotOrigin::Observed ? "observed" : "interpolated");
    } else {
      boxes.push_back(nullptr);
      origins.push_back(nullptr);
    }
  }
  return json{{"track_id", t.track_id},
              {"class_id", t.class_id},
              {"start_frame", t.start_frame},
              {"boxes", boxes},
              {"origins", origins}}
      .dump();
}

std::string to_json_line(const ActionScores& s) {
  return json{{"track_id", s.track_id},
              {"key_frame_index", s.key_frame_index},
              {"scores", s.scores}}
      .dump();
}

Detection detection_from_json(const std::string& line) {
  return detection_from_json_obj(json::parse(line));
}

TrackedDetection tracked_detection_from_json(const std::string& line) {
  const json j = json::parse(line);
  TrackedDetection d;
  d.detection = detection_from_json_obj(j.at("detection"));
  d.track_id = j.at("track_id").get<int>();
  return d;
}

Tubelet tubelet_from_json(const std::string& line) {
  const json j = json::parse(line);
  Tubelet t;
  t.track_id = j.at("track_id").get<int>();
  t.class_id = j.at("class_id").get<int>();
  t.start_frame = j.value("start_frame", 0);
  const json& boxes = j.at("boxes");
  const json origins = j.value("origins", json::array());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].is_null()) {
      t.boxes.emplace_back(std::nullopt);
      t.origins.push_back(SlotOrigin::Observed);
    } else {
      t.boxes.emplace_back(box_from_json(boxes[i]));
      SlotOrigin o = SlotOrigin::Observed;
      if (i < origins.size() && origins[i].is_string() &&
          origins[i].get<std::string>() == "interpolated")
        o = SlotOrigin::Interpolated;
      t.origins.push_back(o);
    }
  }
  return t;
}

ActionScores action_scores_from_json(const std::string& line) {
  const json j = json::parse(line);
  ActionScores s;
  s.track_id = j.at("track_id").get<int>();
  s.key_frame_index = j.at("key_frame_index").get<int>();
  s.scores = j.at("scores").get<std::vector<double>>();
  return s;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& line : lines) f << line << "\n";
}

template <typename T, typename Parse>
static std::vector<T> read_records(const std::string& path, Parse parse) {
  std::vector<T> out;
  for (const auto& line : read_lines(path)) out.push_back(parse(line));
  return out;
}

std::vector<Detection> read_detections_jsonl(const std::string& path) {
  return read_records<Detection>(path, detection_from_json);
}

void write_detections_jsonl(const std::vector<Detection>& dets, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(dets.size());
  for (const auto& d : dets) lines.push_back(to_json_line(d));
  write_lines(lines, path);
}

std::vector<TrackedDetection> read_tracked_jsonl(const std::string& path) {
  return read_records<TrackedDetection>(path, tracked_detection_from_json);
}

void write_tracked_jsonl(const std::vector<TrackedDetection>& dets, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(dets.size());
  for (const auto& d : dets) lines.push_back(to_json_line(d));
  write_lines(lines, path);
}

std::vector<Tubelet> read_tubelets_jsonl(const std::string& path) {
  return read_records<Tubelet>(path, tubelet_from_json);
}

void write_tubelets_jsonl(const std::vector<Tubelet>& tubes, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(tubes.size());
  for (const auto& t : tubes) lines.push_back(to_json_line(t));
  write_lines(lines, path);
}

std::vector<ActionScores> read_scores_jsonl(const std::string& path) {
  return read_records<ActionScores>(path, action_scores_from_json);
}

void write_scores_jsonl(const std::vector<ActionScores>& scores, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(scores.size());
  for (const auto& s : scores) lines.push_back(to_json_line(s));
  write_lines(lines, path);
}

std::vector<double> read_timestamps(const std::string& path) {
  std::vector<double> out;
  for (const auto& line : read_lines(path)) out.push_back(std::stod(line));
  return out;
}

}  // namespace ralacs
