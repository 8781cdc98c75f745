#include <doctest.h>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "flowservo/error.hpp"
#include "flowservo/geometry.hpp"
#include "support.hpp"

using namespace flowservo;
using std::numbers::pi;

TEST_SUITE("geometry") {

TEST_CASE("integrate_pose: straight line along the heading") {
  const Pose p = integrate_pose({{0, 0, 10}, 0.0}, {1, 0, 0, 0}, 1.0);
  CHECK(p.position.isApprox(Eigen::Vector3d(1, 0, 10)));
  CHECK(p.yaw == 0.0);
}

TEST_CASE("integrate_pose: body forward maps to world y at yaw pi/2") {
  const Pose p = integrate_pose({{0, 0, 10}, pi / 2}, {1, 0, 0, 0}, 1.0);
  CHECK(p.position.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.position.y() == doctest::Approx(1.0));
  CHECK(p.position.z() == doctest::Approx(10.0));
  CHECK(p.yaw == doctest::Approx(pi / 2));
}

TEST_CASE("integrate_pose: pure yaw by pi") {
  const Pose p = integrate_pose({{0, 0, 0}, 0.0}, {0, 0, 0, pi}, 1.0);
  CHECK(p.position.norm() == 0.0);
  CHECK(p.yaw == doctest::Approx(pi));
}

TEST_CASE("integrate_pose: v_left moves to the left of the heading, v_up along world z") {
  const Pose p = integrate_pose({{0, 0, 0}, 0.0}, {0, 2, 3, 0}, 0.5);
  CHECK(p.position.isApprox(Eigen::Vector3d(0, 1, 1.5)));
}

TEST_CASE("integrate_pose: zero command is the identity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int n = 0; n < 100; ++n) {
    const Pose p{{u(rng), u(rng), u(rng)}, wrap_angle(u(rng))};
    CHECK(integrate_pose(p, {}, 0.1) == p);
  }
}

TEST_CASE("integrate_pose: two steps of dt equal one step of 2 dt without yaw") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int n = 0; n < 100; ++n) {
    const Pose p{{u(rng), u(rng), u(rng)}, u(rng)};
    const VelocityCommand c{u(rng), u(rng), u(rng), 0.0};
    const Pose twice = integrate_pose(integrate_pose(p, c, 0.1), c, 0.1);
    const Pose once = integrate_pose(p, c, 0.2);
    CHECK((twice.position - once.position).norm() <= 1e-12);
  }
}

TEST_CASE("integrate_pose: rejects non-finite input and non-positive dt") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(integrate_pose({{nan, 0, 0}, 0}, {}, 0.1), DomainError);
  CHECK_THROWS_AS(integrate_pose({}, {1, 0, 0, std::numeric_limits<double>::infinity()}, 0.1), DomainError);
  CHECK_THROWS_AS(integrate_pose({}, {}, 0.0), DomainError);
}

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  CHECK(wrap_angle(pi) == doctest::Approx(pi));
  CHECK(wrap_angle(-pi) == doctest::Approx(pi));
  CHECK(wrap_angle(3 * pi / 2) == doctest::Approx(-pi / 2));
  CHECK(wrap_angle(0.25) == 0.25);
  for (double a = -20; a < 20; a += 0.37) {
    const double w = wrap_angle(a);
    CHECK(w > -pi);
    CHECK(w <= pi);
    CHECK(std::remainder(w - a, 2 * pi) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("body_twist_to_camera_twist examples") {
  Twist t = body_twist_to_camera_twist({1, 0, 0, 0});
  CHECK(t.linear.isApprox(Eigen::Vector3d(0, 0, 1)));
  CHECK(t.angular.isZero());
  t = body_twist_to_camera_twist({0, 1, 0, 0});
  CHECK(t.linear.isApprox(Eigen::Vector3d(-1, 0, 0)));
  CHECK(t.angular.isZero());
  t = body_twist_to_camera_twist({0, 0, 1, 0});
  CHECK(t.linear.isApprox(Eigen::Vector3d(0, -1, 0)));
  t = body_twist_to_camera_twist({0, 0, 0, 1});
  CHECK(t.linear.isZero());
  CHECK(t.angular.isApprox(Eigen::Vector3d(0, -1, 0)));
}

TEST_CASE("body_twist_to_camera_twist is linear") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int n = 0; n < 50; ++n) {
    const VelocityCommand c1{u(rng), u(rng), u(rng), u(rng)};
    const VelocityCommand c2{u(rng), u(rng), u(rng), u(rng)};
    const double a = u(rng), b = u(rng);
    const Twist lhs = body_twist_to_camera_twist(a * c1 + b * c2);
    const Twist t1 = body_twist_to_camera_twist(c1), t2 = body_twist_to_camera_twist(c2);
    CHECK((lhs.linear - (a * t1.linear + b * t2.linear)).norm() <= 1e-12);
    CHECK((lhs.angular - (a * t1.angular + b * t2.angular)).norm() <= 1e-12);
  }
}

TEST_CASE("camera axes agree with the body velocity mapping") {
  // Displacing the pose by a body command moves the world the opposite way in the camera frame.
  const Pose p{{4, -2, 7}, 0.7};
  for (int k = 0; k < 3; ++k) {
    std::array<double, 4> a{};
    a[static_cast<std::size_t>(k)] = 1.0;
    const VelocityCommand c = VelocityCommand::from_array(a);
    const Pose q = integrate_pose(p, c, 1.0);
    const Eigen::Vector3d in_cam = world_from_camera(p).transpose() * (q.position - p.position);
    CHECK((in_cam - body_twist_to_camera_twist(c).linear).norm() <= 1e-12);
  }
  CHECK(heading_vector(p).isApprox(world_from_camera(p).col(2)));
  CHECK(world_from_camera(p).determinant() == doctest::Approx(1.0));
}

TEST_CASE("pixel/normalized round trip is exact on every pixel") {
  const CameraModel cam;
  double worst = 0.0;
  for (int i = 0; i < cam.height; ++i) {
    for (int j = 0; j < cam.width; ++j) {
      const Eigen::Vector2d back = normalized_to_pixel(pixel_to_normalized(i, j, cam), cam);
      worst = std::max(worst, std::max(std::abs(back.x() - i), std::abs(back.y() - j)));
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("pixel_to_normalized follows the pinhole model") {
  const CameraModel cam;
  const Eigen::Vector2d c = pixel_to_normalized(96, 128, cam);
  CHECK(c.norm() == 0.0);
  const Eigen::Vector2d q = pixel_to_normalized(0, 0, cam);
  CHECK(q.x() == doctest::Approx(-1.0));
  CHECK(q.y() == doctest::Approx(-0.75));
  CHECK_THROWS_AS(pixel_to_normalized(-1, 0, cam), DomainError);
  CHECK_THROWS_AS(pixel_to_normalized(0, cam.width, cam), DomainError);
}

TEST_CASE("CameraModel::validate") {
  CHECK_NOTHROW(CameraModel{}.validate());
  CameraModel bad;
  bad.fx = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = CameraModel{};
  bad.width = 1;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = CameraModel{};
  bad.cx = 300;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

}  // TEST_SUITE
