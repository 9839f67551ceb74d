#include "viewfield/stream.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "viewfield/atlas.hpp"

namespace viewfield {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Pose pose_from(const json& j) { return Pose::from_array(j.get<std::array<double, 7>>()); }

std::string frame_name(int id, const char* suffix) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "images/kf_%05d%s", id, suffix);
  return buf;
}

}  // namespace

void write_stream(const fs::path& dir, std::vector<TrackerEvent>& events, const CameraIntrinsics& intrinsics) {
  fs::create_directories(dir / "images");
  std::ofstream out(dir / "stream.jsonl");
  if (!out) throw std::runtime_error("cannot write " + (dir / "stream.jsonl").string());
  for (auto& ev : events) {
    json line;
    switch (ev.tag) {
      case TrackerEvent::Tag::Keyframe: {
        ev.image_path = frame_name(ev.id, ".ppm");
        write_ppm(dir / ev.image_path, ev.image);
        if (ev.depth) {
          ev.depth_path = frame_name(ev.id, "_depth.pgm");
          write_depth_pgm(dir / ev.depth_path, *ev.depth);
        }
        json ids = json::array(), weights = json::array();
        for (const auto& [id, w] : ev.covisible) {
          ids.push_back(id);
          weights.push_back(w);
        }
        line = {{"type", "KEYFRAME"},        {"id", ev.id},
                {"pose", ev.pose.to_array()}, {"image_path", ev.image_path},
                {"depth_path", ev.depth_path}, {"covisible", ids},
                {"covisible_weights", weights}, {"held_out", ev.held_out},
                {"intrinsics", to_json(intrinsics)}};
        break;
      }
      case TrackerEvent::Tag::PoseUpdate: {
        json updates = json::object();
        for (const auto& [id, pose] : ev.updates) updates[std::to_string(id)] = pose.to_array();
        line = {{"type", "POSE_UPDATE"}, {"updates", updates}};
        break;
      }
      case TrackerEvent::Tag::End:
        line = {{"type", "END"}};
        break;
    }
    out << line.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + (dir / "stream.jsonl").string());
}

EventStream read_stream(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "stream.jsonl" : path;
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read stream " + file.string());
  const fs::path base = fs::absolute(file).parent_path();

  EventStream stream;
  bool have_intrinsics = false;
  bool ended = false;
  std::set<int> seen;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& what) {
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    if (ended) fail("event after END");
    try {
      const json j = json::parse(text);
      const std::string type = j.at("type").get<std::string>();
      TrackerEvent ev;
      if (type == "KEYFRAME") {
        ev.tag = TrackerEvent::Tag::Keyframe;
        ev.id = j.at("id").get<int>();
        if (!seen.insert(ev.id).second) fail("duplicate keyframe id " + std::to_string(ev.id));
        ev.pose = pose_from(j.at("pose"));
        ev.held_out = j.value("held_out", false);
        const auto ids = j.at("covisible").get<std::vector<int>>();
        const auto weights = j.value("covisible_weights", std::vector<double>(ids.size(), 1.0));
        if (weights.size() != ids.size()) fail("covisible_weights length mismatch");
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!seen.count(ids[i]) || ids[i] == ev.id) fail("covisible id " + std::to_string(ids[i]) + " not yet seen");
          ev.covisible[ids[i]] = weights[i];
        }
        if (j.contains("intrinsics")) {
          const CameraIntrinsics intr = intrinsics_from_json(j.at("intrinsics"));
          if (!have_intrinsics) {
            stream.intrinsics = intr;
            have_intrinsics = true;
          }
        }
        if (!have_intrinsics) fail("keyframe without intrinsics");
        ev.image_path = (base / j.at("image_path").get<std::string>()).string();
        ev.image = read_ppm(ev.image_path);
        if (ev.image.width != stream.intrinsics.width || ev.image.height != stream.intrinsics.height) {
          fail("image size does not match intrinsics");
        }
        const std::string depth = j.value("depth_path", "");
        if (!depth.empty()) {
          ev.depth_path = (base / depth).string();
          ev.depth = read_depth_pgm(ev.depth_path);
        }
      } else if (type == "POSE_UPDATE") {
        ev.tag = TrackerEvent::Tag::PoseUpdate;
        for (const auto& [key, value] : j.at("updates").items()) {
          const int id = std::stoi(key);
          if (!seen.count(id)) fail("pose update for unknown keyframe " + key);
          ev.updates[id] = pose_from(value);
        }
      } else if (type == "END") {
        ended = true;
      } else {
        fail("unknown event type '" + type + "'");
      }
      stream.events.push_back(std::move(ev));
    } catch (const json::exception& e) {
      fail(std::string("malformed event: ") + e.what());
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (!ended) throw std::runtime_error(file.string() + ": stream does not end with END");
  return stream;
}

}  // namespace viewfield
