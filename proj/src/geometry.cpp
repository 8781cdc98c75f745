#include "flowservo/geometry.hpp"

#include <cmath>
#include <string>

#include "flowservo/error.hpp"

namespace flowservo {

namespace {

bool finite(const VelocityCommand& c) {
  return std::isfinite(c.v_fwd) && std::isfinite(c.v_left) && std::isfinite(c.v_up) &&
         std::isfinite(c.yaw_rate);
}

}  // namespace

VelocityCommand operator+(const VelocityCommand& a, const VelocityCommand& b) {
  return {a.v_fwd + b.v_fwd, a.v_left + b.v_left, a.v_up + b.v_up, a.yaw_rate + b.yaw_rate};
}

VelocityCommand operator*(double s, const VelocityCommand& c) {
  return {s * c.v_fwd, s * c.v_left, s * c.v_up, s * c.yaw_rate};
}

void CameraModel::validate() const {
  if (width < 2 || height < 2) throw DomainError("CameraModel: width and height must be >= 2");
  if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("CameraModel: focal lengths must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw DomainError("CameraModel: principal point outside the image");
}

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  double w = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

Eigen::Vector2d pixel_to_normalized(int i, int j, const CameraModel& cam) {
  if (i < 0 || i >= cam.height || j < 0 || j >= cam.width)
    throw DomainError("pixel_to_normalized: pixel (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") outside image");
  return {(j - cam.cx) / cam.fx, (i - cam.cy) / cam.fy};
}

Eigen::Vector2d normalized_to_pixel(const Eigen::Vector2d& xy, const CameraModel& cam) {
  return {xy.y() * cam.fy + cam.cy, xy.x() * cam.fx + cam.cx};
}

Pose integrate_pose(const Pose& pose, const VelocityCommand& cmd, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("integrate_pose: dt must be positive");
  if (!pose.position.allFinite() || !std::isfinite(pose.yaw) || !finite(cmd))
    throw DomainError("integrate_pose: non-finite input");
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  Pose out;
  out.position = pose.position + Eigen::Vector3d(c * cmd.v_fwd - s * cmd.v_left,
                                                 s * cmd.v_fwd + c * cmd.v_left, cmd.v_up) * dt;
  out.yaw = wrap_angle(pose.yaw + cmd.yaw_rate * dt);
  return out;
}

Twist body_twist_to_camera_twist(const VelocityCommand& cmd) {
  Twist t;
  t.linear = {-cmd.v_left, -cmd.v_up, cmd.v_fwd};
  t.angular = {0.0, -cmd.yaw_rate, 0.0};
  return t;
}

Eigen::Matrix3d world_from_camera(const Pose& pose) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  Eigen::Matrix3d r;
  r.col(0) = Eigen::Vector3d(s, -c, 0.0);  // right
  r.col(1) = Eigen::Vector3d(0.0, 0.0, -1.0);  // down
  r.col(2) = Eigen::Vector3d(c, s, 0.0);  // forward
  return r;
}

Eigen::Vector3d heading_vector(const Pose& pose) {
  return {std::cos(pose.yaw), std::sin(pose.yaw), 0.0};
}

}  // namespace flowservo
