#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "support.hpp"
#include "viewfield/geom.hpp"

using namespace viewfield;
using doctest::Approx;

TEST_CASE("pose construction normalizes and composes with its inverse") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Pose p = testsupport::random_pose(rng);
    CHECK(std::abs(p.rotation().norm() - 1.0) < 1e-12);
    const Pose id = p * p.inverse();
    CHECK(id.translation().norm() < 1e-9);
    CHECK(std::abs(std::abs(id.rotation().w()) - 1.0) < 1e-9);
  }
  const Pose unnormalized(Quat(2.0, 0.0, 0.0, 0.0), Vec3(1, 2, 3));
  CHECK(unnormalized.rotation().norm() == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pose composition is associative") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Pose a = testsupport::random_pose(rng), b = testsupport::random_pose(rng), c = testsupport::random_pose(rng);
    const Pose l = (a * b) * c, r = a * (b * c);
    CHECK((l.translation() - r.translation()).norm() < 1e-9);
    CHECK(l.rotation().angularDistance(r.rotation()) < 1e-9);
  }
}

TEST_CASE("pose array round trip uses translation then xyzw") {
  const Pose p(Quat(Eigen::AngleAxisd(0.3, Vec3::UnitY())), Vec3(1, -2, 3));
  const auto a = p.to_array();
  CHECK(a[0] == 1.0);
  CHECK(a[1] == -2.0);
  CHECK(a[2] == 3.0);
  CHECK(a[4] == Approx(std::sin(0.15)));
  CHECK(a[6] == Approx(std::cos(0.15)));
  const Pose q = Pose::from_array(a);
  CHECK((q.translation() - p.translation()).norm() == 0.0);
  CHECK(q.rotation().angularDistance(p.rotation()) < 1e-15);
}

TEST_CASE("to_contracted axis and pole cases") {
  const auto x = to_contracted(Vec3(1, 0, 0));
  CHECK(x.theta == Approx(0.5));
  CHECK(x.phi == Approx(0.5));
  CHECK(x.rho == Approx(0.5));
  const auto y = to_contracted(Vec3(0, 1, 0));
  CHECK(y.theta == 0.5);
  CHECK(y.phi == Approx(1.0));
  CHECK(y.rho == Approx(0.5));
  const auto south = to_contracted(Vec3(0, -3, 0));
  CHECK(south.theta == 0.5);
  CHECK(south.phi == Approx(0.0));
  const auto o = to_contracted(Vec3::Zero());
  CHECK(o.theta == 0.5);
  CHECK(o.phi == 0.5);
  CHECK(o.rho == 1.0);
}

TEST_CASE("to_contracted matches the spherical definition with asin elevation") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(n(rng), n(rng), n(rng));
    const double r = p.norm();
    const auto c = to_contracted(p);
    CHECK(c.theta == Approx((std::atan2(p.z(), p.x()) + std::numbers::pi) / (2 * std::numbers::pi)).epsilon(1e-12));
    CHECK(c.phi == Approx((std::asin(p.y() / r) + std::numbers::pi / 2) / std::numbers::pi).epsilon(1e-9));
    CHECK(c.rho == Approx(1.0 / (1.0 + r)).epsilon(1e-14));
    CHECK(c.theta >= 0.0);
    CHECK(c.theta <= 1.0);
    CHECK(c.phi >= 0.0);
    CHECK(c.phi <= 1.0);
  }
}

TEST_CASE("to_contracted rejects non-finite input") {
  CHECK_THROWS_AS(to_contracted(Vec3(NAN, 0, 0)), std::domain_error);
  CHECK_THROWS_AS(to_contracted(Vec3(0, INFINITY, 0)), std::domain_error);
}

TEST_CASE("contraction is monotone in radius and uniform in inverse distance") {
  const Vec3 dir = Vec3(0.3, -0.2, 0.9).normalized();
  double last = 2.0;
  for (double r = 0.0; r < 100.0; r += 0.37) {
    const double rho = to_contracted(r * dir).rho;
    CHECK(rho < last);
    CHECK(rho == Approx(1.0 / (1.0 + r)));
    last = rho;
  }
}

TEST_CASE("contraction round trip over r in [1e-3, 1e6]") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> logr(-3.0, 6.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = Vec3(n(rng), n(rng), n(rng)).normalized() * std::pow(10.0, logr(rng));
    const Vec3 q = from_contracted(to_contracted(p));
    CHECK((q - p).norm() / p.norm() < 1e-9);
  }
}

TEST_CASE("from_contracted examples and errors") {
  const Vec3 a = from_contracted({0.5, 0.5, 0.5});
  CHECK((a - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK(from_contracted({0.5, 0.5, 1.0}).norm() == 0.0);
  CHECK_THROWS_AS(from_contracted({0.5, 0.5, 0.0}), std::domain_error);
}

TEST_CASE("to_contracted inverts from_contracted inside the open cube") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    ContractedPoint c{u(rng), 1e-3 + (1 - 2e-3) * u(rng), 1e-3 + (1 - 1e-3) * u(rng)};
    if (c.rho >= 1.0) continue;
    const auto d = to_contracted(from_contracted(c));
    const double dtheta = std::abs(d.theta - c.theta);
    CHECK(std::min(dtheta, 1.0 - dtheta) < 1e-9);
    CHECK(std::abs(d.phi - c.phi) < 1e-9);
    CHECK(std::abs(d.rho - c.rho) < 1e-9);
  }
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(CameraIntrinsics{10, 10, 5, 5, 10, 10}.validate());
  CHECK_THROWS_AS((CameraIntrinsics{0, 10, 5, 5, 10, 10}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((CameraIntrinsics{10, 10, 10, 5, 10, 10}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((CameraIntrinsics{10, 10, 5, -1, 10, 10}.validate()), std::invalid_argument);
}

TEST_CASE("pixel_to_ray principal ray in its own frame") {
  const CameraIntrinsics intr{50, 50, 32, 24, 64, 48};
  std::mt19937_64 rng(7);
  const Pose kf = testsupport::random_pose(rng);
  const Ray r = pixel_to_ray(kf, intr, intr.cx, intr.cy, kf);
  CHECK(r.origin.norm() < 1e-12);
  CHECK((r.direction - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("pixel_to_ray with identity poses is the pinhole ray") {
  const CameraIntrinsics intr{50, 40, 32, 24, 64, 48};
  const Ray r = pixel_to_ray(Pose::identity(), intr, 10.5, 40.5, Pose::identity());
  const Vec3 expected = Vec3((10.5 - 32) / 50, (40.5 - 24) / 40, 1.0).normalized();
  CHECK((r.direction - expected).norm() < 1e-15);
  CHECK(r.origin.norm() == 0.0);
  CHECK(r.direction.norm() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pixel_to_ray frame change is consistent") {
  const CameraIntrinsics intr{50, 50, 32, 24, 64, 48};
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const Pose kf = testsupport::random_pose(rng);
    const Pose anchor = testsupport::random_pose(rng);
    const Ray local = pixel_to_ray(kf, intr, 3.5, 20.5, anchor);
    const Ray world = pixel_to_ray(kf, intr, 3.5, 20.5, Pose::identity());
    CHECK((anchor.transform_point(local.origin) - world.origin).norm() < 1e-9);
    CHECK((anchor.rotate(local.direction) - world.direction).norm() < 1e-9);
  }
}

TEST_CASE("pose_distance") {
  const Pose a = testsupport::translation(0, 0, 0);
  const Pose b = testsupport::translation(0.3, 0, 0);
  CHECK(pose_distance(a, a) == 0.0);
  CHECK(pose_distance(a, b) == Approx(0.3));
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    const Pose p = testsupport::random_pose(rng), q = testsupport::random_pose(rng);
    CHECK(pose_distance(p, q) == pose_distance(q, p));
  }
}
