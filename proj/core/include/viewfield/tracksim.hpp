#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "viewfield/geom.hpp"
#include "viewfield/image.hpp"

namespace viewfield {

struct Sphere {
  Vec3 center;
  double radius = 1.0;
  Vec3 albedo = Vec3::Constant(0.5);
};

struct Box {
  Vec3 min;
  Vec3 max;
  Vec3 albedo = Vec3::Constant(0.5);
};

/// Finite horizontal square at y = height with a smooth two-tone pattern.
struct GroundPlane {
  double height = -1.0;
  double half_extent = 6.0;
  Vec3 albedo_a{0.55, 0.5, 0.45};
  Vec3 albedo_b{0.3, 0.35, 0.4};
  double period = 1.5;

  Vec3 albedo_at(double x, double z) const;
};

/// World frame is y-up. Shading is Lambertian under one directional light.
struct SyntheticScene {
  std::vector<Sphere> spheres;
  std::vector<Box> boxes;
  std::optional<GroundPlane> ground;
  Vec3 background{0.6, 0.7, 0.85};
  Vec3 light_direction = Vec3(0.4, -1.0, 0.3).normalized();  // direction light travels
  double ambient = 0.3;

  std::size_t primitive_count() const { return spheres.size() + boxes.size() + (ground ? 1 : 0); }
  /// Throws std::invalid_argument if there is nothing to see or a primitive is degenerate.
  void validate() const;
};

struct SceneParams {
  int min_primitives = 6;
  int max_primitives = 10;
  double inner_radius = 2.8;  // shell around the trajectory center
  double outer_radius = 4.5;
  double min_size = 0.3;
  double max_size = 0.7;
  bool ground = true;
};

/// Seeded procedural scene: spheres and boxes scattered in a shell around the
/// origin on top of a textured ground plane.
SyntheticScene make_scene(std::uint64_t seed, const SceneParams& params = {});

struct SurfaceHit {
  double t = 0.0;
  Vec3 normal;
  Vec3 albedo;
};

/// Nearest hit along a unit-direction ray, if any.
std::optional<SurfaceHit> intersect(const SyntheticScene& scene, const Vec3& origin, const Vec3& direction);
Vec3 shade(const SyntheticScene& scene, const SurfaceHit& hit);

struct GroundTruthView {
  Image image;
  DepthMap depth;  // z-depth, invalid where the ray escapes
};

GroundTruthView raytrace_gt(const SyntheticScene& scene, const Pose& pose, const CameraIntrinsics& intrinsics);

/// Camera-to-world pose at `position` looking toward `target`, optical axes
/// +z forward, +x right, +y down, with world +y as up.
Pose look_at(const Vec3& position, const Vec3& target);

enum class TrajectoryKind { Loop, Line };

struct TrajectoryParams {
  double height = 0.0;
  double tilt_deg = 12.0;       // downward pitch
  double yaw_offset_deg = 20.0; // loop: rotation of the outward view toward the travel direction
};

/// loop: circle of the given radius, closing exactly on its start pose, cameras
/// looking outward into the scene shell. line: straight segment of the given
/// extent along +x, cameras looking along +z.
std::vector<Pose> generate_trajectory(TrajectoryKind kind, int n_keyframes, double radius_or_extent,
                                      const TrajectoryParams& params = {});

struct DriftParams {
  Vec3 bias_direction = Vec3(1.0, 0.2, -0.5).normalized();
  Vec3 rotation_axis = Vec3(0.0, 1.0, 0.0);
  /// Rotation drift per step per unit of drift_rate, in radians.
  double rotation_per_rate = 0.5;
};

/// Step k (1-based) gets translation += k * drift_rate * bias and its
/// orientation pre-rotated by k * drift_rate * rotation_per_rate about the axis.
std::vector<Pose> inject_drift(const std::vector<Pose>& poses, double drift_rate, const DriftParams& params = {});

/// Symmetric frustum overlap of two cameras on the scene's geometry: the mean,
/// over both directions, of the fraction of sampled surface points of one view
/// that project inside the other. Also returns the shared-sample count.
struct Overlap {
  double fraction = 0.0;
  double shared = 0.0;
};
Overlap frustum_overlap(const SyntheticScene& scene, const Pose& a, const Pose& b, const CameraIntrinsics& intrinsics,
                        int samples_per_axis = 8);

struct TrackerEvent {
  enum class Tag { Keyframe, PoseUpdate, End };
  Tag tag = Tag::End;
  // Keyframe
  int id = -1;
  Pose pose;  // as stamped by the tracker
  Image image;
  std::optional<DepthMap> depth;
  std::map<int, double> covisible;  // id -> shared-observation weight
  bool held_out = false;
  std::string image_path;
  std::string depth_path;
  // PoseUpdate
  std::map<int, Pose> updates;
};

struct StreamParams {
  std::optional<int> loop_close_at;  // frame index at which the correction fires
  double covis_radius = 0.0;
  double overlap_threshold = 0.3;
  int holdout_every = 10;  // every n-th keyframe is a test view; 0 disables
  int overlap_samples = 8;
  bool with_depth = true;
};

/// Keyframes are rendered from ground-truth poses but stamped with drifted
/// ones. At loop_close_at a pose update snaps every earlier keyframe to ground
/// truth; later keyframes carry the same rigid correction.
std::vector<TrackerEvent> emit_stream(const SyntheticScene& scene, const std::vector<Pose>& gt_poses,
                                      const std::vector<Pose>& drifted_poses, const CameraIntrinsics& intrinsics,
                                      const StreamParams& params);

}  // namespace viewfield
