#include "viewfield/tracksim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace viewfield {

namespace {

constexpr double kHitEpsilon = 1e-9;

Vec3 hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  Vec3 rgb;
  switch (static_cast<int>(hp) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  return rgb + Vec3::Constant(v - c);
}

std::optional<double> hit_sphere(const Sphere& s, const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - s.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  // Numerically stable pair of roots.
  const double q = b > 0.0 ? -(b + root) : -(b - root);
  double t0 = q, t1 = q != 0.0 ? c / q : -b;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > kHitEpsilon) return t0;
  if (t1 > kHitEpsilon) return t1;
  return std::nullopt;
}

std::optional<std::pair<double, Vec3>> hit_box(const Box& box, const Vec3& o, const Vec3& d) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis_near = -1;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (box.min[a] - o[a]) / d[a];
    double t1 = (box.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      axis_near = a;
    }
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= kHitEpsilon || axis_near < 0) return std::nullopt;
  Vec3 n = Vec3::Zero();
  n[axis_near] = d[axis_near] > 0.0 ? -1.0 : 1.0;
  return std::make_pair(t_near, n);
}

}  // namespace

Vec3 GroundPlane::albedo_at(double x, double z) const {
  const double k = 2.0 * std::numbers::pi / period;
  const double m = 0.5 + 0.5 * std::sin(k * x) * std::sin(k * z);
  return (1.0 - m) * albedo_a + m * albedo_b;
}

void SyntheticScene::validate() const {
  if (primitive_count() == 0) throw std::invalid_argument("scene has no primitives");
  for (const auto& s : spheres) {
    if (!s.center.allFinite() || !(s.radius > 0.0)) throw std::invalid_argument("degenerate sphere");
  }
  for (const auto& b : boxes) {
    if (!b.min.allFinite() || !b.max.allFinite() || (b.max - b.min).minCoeff() <= 0.0) {
      throw std::invalid_argument("degenerate box");
    }
  }
}

SyntheticScene make_scene(std::uint64_t seed, const SceneParams& params) {
  if (params.min_primitives < 1 || params.max_primitives < params.min_primitives) {
    throw std::invalid_argument("make_scene: bad primitive count range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count_dist(params.min_primitives, params.max_primitives);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticScene scene;
  const double floor_y = -1.0;
  if (params.ground) scene.ground = GroundPlane{};
  const int count = count_dist(rng);
  // Even angular spread with jitter keeps every part of the loop textured.
  const double start = unit(rng) * 2.0 * std::numbers::pi;
  for (int i = 0; i < count; ++i) {
    const double angle = start + (i + 0.8 * (unit(rng) - 0.5)) * 2.0 * std::numbers::pi / count;
    const double radius = params.inner_radius + unit(rng) * (params.outer_radius - params.inner_radius);
    const double size = params.min_size + unit(rng) * (params.max_size - params.min_size);
    const Vec3 albedo = hsv_to_rgb(unit(rng), 0.45 + 0.35 * unit(rng), 0.65 + 0.3 * unit(rng));
    const double x = radius * std::cos(angle);
    const double z = radius * std::sin(angle);
    if (unit(rng) < 0.5) {
      scene.spheres.push_back({Vec3(x, floor_y + size + 0.4 * unit(rng), z), size, albedo});
    } else {
      const double height = size * (1.0 + 1.5 * unit(rng));
      scene.boxes.push_back({Vec3(x - size, floor_y, z - size), Vec3(x + size, floor_y + height, z + size), albedo});
    }
  }
  if (scene.ground) scene.ground->height = floor_y;
  scene.validate();
  return scene;
}

std::optional<SurfaceHit> intersect(const SyntheticScene& scene, const Vec3& origin, const Vec3& direction) {
  std::optional<SurfaceHit> best;
  auto offer = [&](double t, const Vec3& n, const Vec3& albedo) {
    if (!best || t < best->t) best = SurfaceHit{t, n, albedo};
  };
  for (const auto& s : scene.spheres) {
    if (auto t = hit_sphere(s, origin, direction)) offer(*t, (origin + *t * direction - s.center).normalized(), s.albedo);
  }
  for (const auto& b : scene.boxes) {
    if (auto h = hit_box(b, origin, direction)) offer(h->first, h->second, b.albedo);
  }
  if (scene.ground && direction.y() != 0.0) {
    const auto& g = *scene.ground;
    const double t = (g.height - origin.y()) / direction.y();
    if (t > kHitEpsilon) {
      const Vec3 p = origin + t * direction;
      if (std::abs(p.x()) <= g.half_extent && std::abs(p.z()) <= g.half_extent) {
        offer(t, Vec3(0.0, origin.y() >= g.height ? 1.0 : -1.0, 0.0), g.albedo_at(p.x(), p.z()));
      }
    }
  }
  return best;
}

Vec3 shade(const SyntheticScene& scene, const SurfaceHit& hit) {
  const double lambert = std::max(0.0, hit.normal.dot(-scene.light_direction));
  return hit.albedo * (scene.ambient + (1.0 - scene.ambient) * lambert);
}

GroundTruthView raytrace_gt(const SyntheticScene& scene, const Pose& pose, const CameraIntrinsics& intrinsics) {
  intrinsics.validate();
  GroundTruthView view{Image(intrinsics.width, intrinsics.height, scene.background),
                       DepthMap(intrinsics.width, intrinsics.height)};
  for (int v = 0; v < intrinsics.height; ++v) {
    for (int u = 0; u < intrinsics.width; ++u) {
      const Vec3 cam = intrinsics.camera_direction(u + 0.5, v + 0.5);
      const double length = cam.norm();
      const Vec3 dir = pose.rotate(cam / length);
      if (auto hit = intersect(scene, pose.translation(), dir)) {
        view.image.set(u, v, shade(scene, *hit));
        view.depth.set(u, v, hit->t / length, true);
      }
    }
  }
  return view;
}

Pose look_at(const Vec3& position, const Vec3& target) {
  const Vec3 forward = (target - position).normalized();
  const Vec3 up(0.0, 1.0, 0.0);
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) throw std::invalid_argument("look_at: view direction parallel to up");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose(r, position);
}

std::vector<Pose> generate_trajectory(TrajectoryKind kind, int n_keyframes, double radius_or_extent,
                                      const TrajectoryParams& params) {
  if (n_keyframes < 2) throw std::invalid_argument("generate_trajectory: need at least two keyframes");
  constexpr double pi = std::numbers::pi;
  const double tilt = params.tilt_deg * pi / 180.0;
  std::vector<Pose> poses;
  poses.reserve(n_keyframes);
  for (int k = 0; k < n_keyframes; ++k) {
    const double f = static_cast<double>(k) / (n_keyframes - 1);
    Vec3 position, heading;
    if (kind == TrajectoryKind::Loop) {
      const double a = 2.0 * pi * f;
      const double yaw = params.yaw_offset_deg * pi / 180.0;
      const Vec3 radial(std::cos(a), 0.0, std::sin(a));
      const Vec3 tangent(-std::sin(a), 0.0, std::cos(a));
      position = Vec3(radius_or_extent * std::cos(a), params.height, radius_or_extent * std::sin(a));
      heading = std::cos(yaw) * radial + std::sin(yaw) * tangent;
      if (k == n_keyframes - 1) {  // close exactly on the start pose
        position = Vec3(radius_or_extent, params.height, 0.0);
        heading = std::cos(yaw) * Vec3(1, 0, 0) + std::sin(yaw) * Vec3(0, 0, 1);
      }
    } else {
      position = Vec3(radius_or_extent * (f - 0.5), params.height, 0.0);
      heading = Vec3(0.0, 0.0, 1.0);
    }
    const Vec3 dir = std::cos(tilt) * heading + std::sin(tilt) * Vec3(0.0, -1.0, 0.0);
    poses.push_back(look_at(position, position + dir));
  }
  return poses;
}

std::vector<Pose> inject_drift(const std::vector<Pose>& poses, double drift_rate, const DriftParams& params) {
  if (drift_rate < 0.0) throw std::invalid_argument("inject_drift: negative drift rate");
  std::vector<Pose> out;
  out.reserve(poses.size());
  const Vec3 bias = params.bias_direction;
  const Vec3 axis = params.rotation_axis.normalized();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    if (drift_rate == 0.0) {
      out.push_back(poses[i]);
      continue;
    }
    const Quat drift_rot(Eigen::AngleAxisd(k * drift_rate * params.rotation_per_rate, axis));
    out.emplace_back(drift_rot * poses[i].rotation(), poses[i].translation() + k * drift_rate * bias);
  }
  return out;
}

namespace {

// Fraction of surface samples seen by `from` that land inside `to`'s image.
std::pair<int, int> visible_from(const SyntheticScene& scene, const Pose& from, const Pose& to,
                                 const CameraIntrinsics& intr, int samples) {
  const Pose world_to_to = to.inverse();
  int hits = 0, inside = 0;
  for (int j = 0; j < samples; ++j) {
    for (int i = 0; i < samples; ++i) {
      const double u = (i + 0.5) * intr.width / samples;
      const double v = (j + 0.5) * intr.height / samples;
      const Vec3 dir = from.rotate(intr.camera_direction(u, v).normalized());
      const auto hit = intersect(scene, from.translation(), dir);
      if (!hit) continue;
      ++hits;
      const Vec3 p = world_to_to.transform_point(from.translation() + hit->t * dir);
      if (p.z() <= 0.0) continue;
      const double pu = intr.fx * p.x() / p.z() + intr.cx;
      const double pv = intr.fy * p.y() / p.z() + intr.cy;
      if (pu >= 0.0 && pu < intr.width && pv >= 0.0 && pv < intr.height) ++inside;
    }
  }
  return {hits, inside};
}

}  // namespace

Overlap frustum_overlap(const SyntheticScene& scene, const Pose& a, const Pose& b, const CameraIntrinsics& intrinsics,
                        int samples_per_axis) {
  const auto [hits_a, in_b] = visible_from(scene, a, b, intrinsics, samples_per_axis);
  const auto [hits_b, in_a] = visible_from(scene, b, a, intrinsics, samples_per_axis);
  const double fa = hits_a > 0 ? static_cast<double>(in_b) / hits_a : 0.0;
  const double fb = hits_b > 0 ? static_cast<double>(in_a) / hits_b : 0.0;
  return {0.5 * (fa + fb), 0.5 * (in_a + in_b)};
}

std::vector<TrackerEvent> emit_stream(const SyntheticScene& scene, const std::vector<Pose>& gt_poses,
                                      const std::vector<Pose>& drifted_poses, const CameraIntrinsics& intrinsics,
                                      const StreamParams& params) {
  const int n = static_cast<int>(gt_poses.size());
  if (drifted_poses.size() != gt_poses.size()) throw std::invalid_argument("emit_stream: pose lists differ in length");
  if (params.loop_close_at && (*params.loop_close_at < 1 || *params.loop_close_at > n)) {
    throw std::out_of_range("emit_stream: loop_close_at out of range");
  }
  scene.validate();
  intrinsics.validate();

  auto held_out = [&](int k) { return params.holdout_every > 0 && (k + 1) % params.holdout_every == 0; };

  std::vector<TrackerEvent> events;
  Pose correction = Pose::identity();
  for (int k = 0; k < n; ++k) {
    if (params.loop_close_at && k == *params.loop_close_at) {
      TrackerEvent update;
      update.tag = TrackerEvent::Tag::PoseUpdate;
      for (int j = 0; j < k; ++j) update.updates[j] = gt_poses[j];
      events.push_back(std::move(update));
      correction = gt_poses[k - 1] * drifted_poses[k - 1].inverse();
    }
    TrackerEvent ev;
    ev.tag = TrackerEvent::Tag::Keyframe;
    ev.id = k;
    ev.pose = correction * drifted_poses[k];
    ev.held_out = held_out(k);
    GroundTruthView gt = raytrace_gt(scene, gt_poses[k], intrinsics);
    ev.image = quantize_8bit(gt.image);
    if (params.with_depth) ev.depth = std::move(gt.depth);
    for (int j = 0; j < k; ++j) {
      if (held_out(j)) continue;
      const Overlap ov = frustum_overlap(scene, gt_poses[k], gt_poses[j], intrinsics, params.overlap_samples);
      const bool near = pose_distance(gt_poses[k], gt_poses[j]) <= params.covis_radius;
      if (ov.fraction > params.overlap_threshold || near) ev.covisible[j] = std::max(ov.shared, 1.0);
    }
    events.push_back(std::move(ev));
  }
  if (params.loop_close_at && *params.loop_close_at == n) {
    TrackerEvent update;
    update.tag = TrackerEvent::Tag::PoseUpdate;
    for (int j = 0; j < n; ++j) update.updates[j] = gt_poses[j];
    events.push_back(std::move(update));
  }
  events.push_back(TrackerEvent{});
  return events;
}

}  // namespace viewfield
