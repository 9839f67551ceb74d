#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <string>

#include "viewfield/atlas.hpp"
#include "viewfield/tracksim.hpp"

namespace testsupport {

using namespace viewfield;

inline CameraIntrinsics small_intrinsics(int size = 16) {
  const double f = 0.75 * size;
  return {f, f, 0.5 * size, 0.5 * size, size, size};
}

/// Small field so unit tests and finite differences stay fast.
inline FieldConfig tiny_field() {
  FieldConfig c;
  c.grid = {3, 2, 4, 1.5, 8};
  c.proposal_grid = {2, 2, 3, 1.5, 6};
  c.density_hidden = 8;
  c.geo_features = 3;
  c.color_hidden = 8;
  c.color_hidden_layers = 1;
  c.proposal_hidden = 4;
  return c;
}

inline Keyframe make_keyframe(int id, const Pose& pose, const CameraIntrinsics& intr,
                              const SyntheticScene* scene = nullptr) {
  Keyframe kf;
  kf.id = id;
  kf.pose = pose;
  if (scene) {
    auto gt = raytrace_gt(*scene, pose, intr);
    kf.image = gt.image;
    kf.depth = gt.depth;
  } else {
    kf.image = Image(intr.width, intr.height, Vec3(0.2, 0.4, 0.6));
  }
  return kf;
}

inline Pose translation(double x, double y = 0.0, double z = 0.0) { return Pose(Quat::Identity(), Vec3(x, y, z)); }

inline Pose random_pose(std::mt19937_64& rng, double extent = 2.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  std::uniform_real_distribution<double> u(-extent, extent);
  return Pose(q, Vec3(u(rng), u(rng), u(rng)));
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("viewfield_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace testsupport
