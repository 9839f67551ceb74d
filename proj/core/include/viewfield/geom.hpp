#pragma once

#include <array>
#include <span>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace viewfield {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform, camera-to-world when attached to a keyframe.
///
/// The rotation is kept as a unit quaternion; every constructor renormalizes
/// so downstream code never sees a drifting norm.
class Pose {
 public:
  Pose();
  Pose(const Quat& rotation, const Vec3& translation);
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return {}; }

  /// Serialized as [tx, ty, tz, qx, qy, qz, qw].
  static Pose from_array(std::span<const double, 7> values);
  std::array<double, 7> to_array() const;

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;

  Vec3 transform_point(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

 private:
  Quat rotation_;
  Vec3 translation_;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

/// Spherical contracted coordinates, each component in [0, 1].
struct ContractedPoint {
  double theta = 0.5;  // azimuth
  double phi = 0.5;    // elevation
  double rho = 1.0;    // 1 / (1 + r)
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws std::invalid_argument when the intrinsics are unusable.
  void validate() const;
  /// Direction of the pinhole ray through continuous pixel (u, v) in the
  /// camera frame (+z forward, +x right, +y down), not normalized.
  Vec3 camera_direction(double u, double v) const;
};

/// Cartesian model-local point to spherical contracted coordinates.
///
/// theta = (atan2(z, x) + pi) / 2pi, phi = (elevation + pi/2) / pi,
/// rho = 1 / (1 + r). The origin and the poles are singular; there theta (and
/// at the origin also phi) is pinned to 0.5. Throws std::domain_error on
/// non-finite input.
ContractedPoint to_contracted(const Vec3& p);

/// Exact inverse of to_contracted away from the poles and the origin.
/// Throws std::domain_error for rho <= 0 (the point at infinity).
Vec3 from_contracted(const ContractedPoint& c);

/// Ray through continuous pixel coordinates (u, v) of a camera at kf_pose,
/// expressed in the local frame of model_anchor.
Ray pixel_to_ray(const Pose& kf_pose, const CameraIntrinsics& intrinsics, double u, double v,
                 const Pose& model_anchor);

/// Euclidean distance between the translation components.
double pose_distance(const Pose& a, const Pose& b);

}  // namespace viewfield
