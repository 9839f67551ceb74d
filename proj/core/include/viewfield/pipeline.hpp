#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "viewfield/atlas.hpp"
#include "viewfield/blend.hpp"
#include "viewfield/report.hpp"
#include "viewfield/stream.hpp"

namespace viewfield {

enum class MapMode { ViewCentric, WorldCentricSingle };

std::string to_string(MapMode mode);
/// Accepts "view_centric" or "world_centric_single"; throws std::invalid_argument otherwise.
MapMode map_mode_from_string(const std::string& text);

struct RunConfig {
  MapMode mode = MapMode::ViewCentric;
  std::filesystem::path stream;
  std::filesystem::path out;
  int steps_per_keyframe = 30;
  int eval_interval = 10;  // training keyframes between evaluations
  bool rescale = true;     // fit the trajectory into the unit sphere
  bool write_renders = true;
  bool write_checkpoint = true;
  AtlasConfig atlas;  // seed, loss weights, d_th, model cap, ray counts
  BlendConfig blend;

  /// Throws std::invalid_argument on negative weights or nonsensical counts.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Global similarity x -> scale * (x - center) applied to every pose and depth.
struct SceneTransform {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Pose apply(const Pose& pose) const { return Pose(pose.rotation(), scale * (pose.translation() - center)); }
};

/// Centers the bounding sphere of the keyframe positions in the stream and
/// scales it to radius one. Identity for fewer than two distinct positions.
SceneTransform fit_unit_sphere(const EventStream& stream);

struct RunResult {
  std::vector<MetricRecord> records;
  std::optional<Atlas> atlas;
  SceneTransform transform;
  double train_seconds = 0.0;
  long train_steps = 0;
};

/// Replays the stream through the atlas, training after every keyframe and
/// evaluating held-out frames periodically and around each pose update.
/// Writes config.json, metrics.csv, summary.csv, timing.csv, plots and (by
/// default) a checkpoint and final renders to config.out when it is set.
RunResult run_pipeline(const RunConfig& config);
RunResult run_pipeline(const RunConfig& config, const EventStream& stream);

/// Re-evaluates a saved run's checkpoint on the held-out frames of a stream,
/// using their final poses. Writes metrics.csv and summary.csv to out if set.
std::vector<MetricRecord> evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                              const std::filesystem::path& stream_path,
                                              const std::filesystem::path& out, const BlendConfig& blend = {});

struct GenConfig {
  std::uint64_t scene_seed = 0;
  int keyframes = 40;
  TrajectoryKind trajectory = TrajectoryKind::Loop;
  double radius = 2.0;  // loop radius or line extent, meters
  double drift_rate = 0.0;
  std::optional<int> loop_close_at;
  double covis_radius = 0.0;
  int width = 64;
  int height = 64;
  double focal = 48.0;
  int holdout_every = 10;
  bool with_depth = true;

  CameraIntrinsics intrinsics() const;
};

/// Synthesizes a scene, trajectory and drifted event stream and writes it to dir.
EventStream generate_stream(const GenConfig& config, const std::filesystem::path& dir);

}  // namespace viewfield
