#pragma once

#include <array>
#include <numbers>

#include <Eigen/Core>

namespace flowservo {

// World frame: x east, y north, z up. Body frame: x forward, y left, z up.
// Camera frame: z forward (optical axis = body forward), x right, y down.

struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;  // about world z, zero facing +x, wrapped to (-pi, pi]

  bool operator==(const Pose& o) const { return position == o.position && yaw == o.yaw; }
};

struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();
};

/// 4-DoF body-frame velocity command, the controller's decision variable.
struct VelocityCommand {
  double v_fwd = 0.0;
  double v_left = 0.0;
  double v_up = 0.0;
  double yaw_rate = 0.0;

  static constexpr int kDim = 4;

  std::array<double, 4> as_array() const { return {v_fwd, v_left, v_up, yaw_rate}; }
  static VelocityCommand from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
  double operator[](int k) const { return as_array()[static_cast<std::size_t>(k)]; }

  bool operator==(const VelocityCommand&) const = default;
};

VelocityCommand operator+(const VelocityCommand& a, const VelocityCommand& b);
VelocityCommand operator*(double s, const VelocityCommand& c);

struct CameraModel {
  int width = 256;
  int height = 192;
  double fx = 128.0;
  double fy = 128.0;
  double cx = 128.0;
  double cy = 96.0;

  /// Throws DomainError unless W, H >= 2, fx, fy > 0 and the principal point lies in the image.
  void validate() const;

  bool operator==(const CameraModel&) const = default;
};

/// Wraps into (-pi, pi].
double wrap_angle(double a);

/// Pixel (row i, column j) to normalized image coordinates (x, y).
Eigen::Vector2d pixel_to_normalized(int i, int j, const CameraModel& cam);

/// Inverse of pixel_to_normalized, returned as fractional (row, col).
Eigen::Vector2d normalized_to_pixel(const Eigen::Vector2d& xy, const CameraModel& cam);

/// First-order hold: body velocities are rotated by the pre-update yaw.
Pose integrate_pose(const Pose& pose, const VelocityCommand& cmd, double dt);

Twist body_twist_to_camera_twist(const VelocityCommand& cmd);

/// Columns are the camera x (right), y (down), z (forward) axes expressed in world.
Eigen::Matrix3d world_from_camera(const Pose& pose);

Eigen::Vector3d heading_vector(const Pose& pose);

}  // namespace flowservo
