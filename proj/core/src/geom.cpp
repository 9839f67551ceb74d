#include "viewfield/geom.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace viewfield {

Pose::Pose() : rotation_(Quat::Identity()), translation_(Vec3::Zero()) {}

Pose::Pose(const Quat& rotation, const Vec3& translation)
    : rotation_(rotation.normalized()), translation_(translation) {
  if (!std::isfinite(rotation_.norm()) || !translation_.allFinite()) {
    throw std::domain_error("Pose: non-finite rotation or translation");
  }
}

Pose::Pose(const Mat3& rotation, const Vec3& translation) : Pose(Quat(rotation), translation) {}

Pose Pose::from_array(std::span<const double, 7> v) {
  return Pose(Quat(v[6], v[3], v[4], v[5]), Vec3(v[0], v[1], v[2]));
}

std::array<double, 7> Pose::to_array() const {
  return {translation_.x(), translation_.y(), translation_.z(), rotation_.x(),
          rotation_.y(),    rotation_.z(),    rotation_.w()};
}

Pose Pose::inverse() const {
  const Quat inv = rotation_.conjugate();
  return Pose(inv, -(inv * translation_));
}

Pose Pose::operator*(const Pose& rhs) const {
  return Pose(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: focal length must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: empty image");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::invalid_argument("intrinsics: principal point outside the image");
  }
}

Vec3 CameraIntrinsics::camera_direction(double u, double v) const {
  return {(u - cx) / fx, (v - cy) / fy, 1.0};
}

ContractedPoint to_contracted(const Vec3& p) {
  if (!p.allFinite()) throw std::domain_error("to_contracted: non-finite point");
  constexpr double pi = std::numbers::pi;
  const double horizontal = std::hypot(p.x(), p.z());
  const double r = std::hypot(horizontal, p.y());
  ContractedPoint c;
  c.rho = 1.0 / (1.0 + r);
  if (r == 0.0) return c;
  // atan2 of the horizontal radius gives a well-conditioned elevation near the poles.
  c.phi = (std::atan2(p.y(), horizontal) + 0.5 * pi) / pi;
  c.theta = horizontal == 0.0 ? 0.5 : (std::atan2(p.z(), p.x()) + pi) / (2.0 * pi);
  return c;
}

Vec3 from_contracted(const ContractedPoint& c) {
  if (!(c.rho > 0.0)) throw std::domain_error("from_contracted: rho must be positive");
  constexpr double pi = std::numbers::pi;
  const double r = 1.0 / c.rho - 1.0;
  const double azimuth = c.theta * 2.0 * pi - pi;
  const double elevation = c.phi * pi - 0.5 * pi;
  const double horizontal = r * std::cos(elevation);
  return {horizontal * std::cos(azimuth), r * std::sin(elevation), horizontal * std::sin(azimuth)};
}

Ray pixel_to_ray(const Pose& kf_pose, const CameraIntrinsics& intrinsics, double u, double v,
                 const Pose& model_anchor) {
  const Pose camera_to_local = model_anchor.inverse() * kf_pose;
  const Vec3 dir = camera_to_local.rotate(intrinsics.camera_direction(u, v)).normalized();
  return Ray{camera_to_local.translation(), dir};
}

double pose_distance(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm();
}

}  // namespace viewfield
