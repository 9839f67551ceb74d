#pragma once

#include <filesystem>
#include <vector>

#include "viewfield/geom.hpp"
#include "viewfield/tracksim.hpp"

namespace viewfield {

/// A tracker event stream as read from disk: one JSON object per line in
/// stream.jsonl, images in a sibling images/ directory.
struct EventStream {
  CameraIntrinsics intrinsics;
  std::vector<TrackerEvent> events;
};

/// Writes stream.jsonl plus PPM / 16-bit PGM images under dir. Keyframe
/// image_path / depth_path are set relative to dir.
void write_stream(const std::filesystem::path& dir, std::vector<TrackerEvent>& events,
                  const CameraIntrinsics& intrinsics);

/// Reads and validates a stream file (or a directory holding stream.jsonl).
/// Image paths come back absolute. Throws std::runtime_error naming the
/// offending line on malformed input.
EventStream read_stream(const std::filesystem::path& path);

}  // namespace viewfield
