#include "flowservo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>

#include <Eigen/Geometry>

#include "flowservo/error.hpp"

namespace flowservo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rays per ring of the cone bundle grow linearly with the ring index.
constexpr int kConeRings = 24;
constexpr int kConeRaysPerRing = 8;

}  // namespace

bool Building::contains(const Eigen::Vector3d& p) const {
  return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
}

double Building::distance_to(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d below = (min_corner - p).cwiseMax(0.0);
  const Eigen::Vector3d above = (p - max_corner).cwiseMax(0.0);
  return (below + above).norm();
}

void Scene::validate() const {
  if (!(detection_range > 0.0)) throw DomainError("Scene: detection_range must be positive");
  if (!(corridor_half_angle > 0.0 && corridor_half_angle < std::numbers::pi / 2))
    throw DomainError("Scene: corridor_half_angle must lie in (0, pi/2)");
  std::set<int> ids;
  for (const auto& b : buildings) {
    if (b.id < 0) throw DomainError("Scene: building id " + std::to_string(b.id) + " is negative");
    if (!ids.insert(b.id).second) throw DomainError("Scene: duplicate building id " + std::to_string(b.id));
    if (!b.min_corner.allFinite() || !b.max_corner.allFinite() ||
        !((b.max_corner - b.min_corner).array() > 0.0).all())
      throw DomainError("Scene: building " + std::to_string(b.id) + " has non-positive volume");
  }
}

double Scene::distance_to_nearest(const Eigen::Vector3d& p) const {
  double best = kInf;
  for (const auto& b : buildings) best = std::min(best, b.distance_to(p));
  return best;
}

std::optional<double> ray_box_intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                        const Building& box) {
  if (direction.squaredNorm() == 0.0) throw DomainError("ray_box_intersect: zero direction");
  double t_near = -kInf;
  double t_far = kInf;
  for (int a = 0; a < 3; ++a) {
    const double o = origin[a];
    const double d = direction[a];
    const double lo = box.min_corner[a];
    const double hi = box.max_corner[a];
    if (d == 0.0) {
      if (o < lo || o > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - o) / d;
    double t1 = (hi - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_far < 0.0) return std::nullopt;
  return std::max(t_near, 0.0);
}

std::optional<RayHit> cast_ray(const Scene& scene, const Eigen::Vector3d& origin,
                               const Eigen::Vector3d& direction) {
  std::optional<RayHit> best;
  for (const auto& b : scene.buildings) {
    const auto t = ray_box_intersect(origin, direction, b);
    if (!t) continue;
    if (!best || *t < best->distance || (*t == best->distance && b.id < best->building_id))
      best = RayHit{*t, b.id};
  }
  return best;
}

RenderResult render_depth_and_ids(const Scene& scene, const Pose& camera_pose, const CameraModel& cam) {
  cam.validate();
  RenderResult out{DepthMap(cam.height, cam.width, kInf), IdBuffer(cam.height, cam.width, kNoBuilding)};
  if (scene.buildings.empty()) return out;
  const Eigen::Matrix3d r = world_from_camera(camera_pose);
  for (int i = 0; i < cam.height; ++i) {
    for (int j = 0; j < cam.width; ++j) {
      const Eigen::Vector2d xy = pixel_to_normalized(i, j, cam);
      const Eigen::Vector3d ray_cam(xy.x(), xy.y(), 1.0);
      const double norm = ray_cam.norm();
      const Eigen::Vector3d dir = r * (ray_cam / norm);
      if (const auto hit = cast_ray(scene, camera_pose.position, dir)) {
        out.depth(i, j) = hit->distance / norm;
        out.ids(i, j) = hit->building_id;
      }
    }
  }
  return out;
}

std::optional<int> select_building_of_concern(const Scene& scene, const Pose& pose,
                                              const Eigen::Vector3d& heading) {
  if (std::abs(heading.norm() - 1.0) > 1e-9)
    throw DomainError("select_building_of_concern: heading must be a unit vector");
  if (scene.buildings.empty()) return std::nullopt;

  // Orthonormal basis around the heading.
  Eigen::Vector3d helper = std::abs(heading.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d u = heading.cross(helper).normalized();
  const Eigen::Vector3d w = heading.cross(u);

  std::optional<RayHit> best;
  auto consider = [&](const Eigen::Vector3d& dir) {
    const auto hit = cast_ray(scene, pose.position, dir);
    if (!hit || hit->distance > scene.detection_range) return;
    if (!best || hit->distance < best->distance ||
        (hit->distance == best->distance && hit->building_id < best->building_id))
      best = hit;
  };

  consider(heading);
  for (int ring = 1; ring <= kConeRings; ++ring) {
    const double alpha = scene.corridor_half_angle * ring / kConeRings;
    const int count = kConeRaysPerRing * ring;
    for (int k = 0; k < count; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / count;
      const Eigen::Vector3d dir =
          std::cos(alpha) * heading + std::sin(alpha) * (std::cos(phi) * u + std::sin(phi) * w);
      consider(dir.normalized());
    }
  }
  if (!best) return std::nullopt;
  return best->building_id;
}

ObstacleMask render_obstacle_mask(const IdBuffer& ids, std::optional<int> boc) {
  ObstacleMask mask(ids.rows(), ids.cols(), 0);
  if (!boc) return mask;
  auto out = mask.begin();
  for (auto id : ids) *out++ = (id == *boc) ? 1 : 0;
  return mask;
}

FlowResult analytic_flow(const Pose& pose_prev, const Pose& pose_curr, const DepthMap& depth_prev,
                         const CameraModel& cam) {
  cam.validate();
  if (!depth_prev.same_shape(cam.height, cam.width))
    throw DomainError("analytic_flow: depth map does not match the camera model");
  FlowResult out{FlowField(cam.height, cam.width), ValidityGrid(cam.height, cam.width, 0)};
  const Eigen::Matrix3d r_prev = world_from_camera(pose_prev);
  const Eigen::Matrix3d r_curr_t = world_from_camera(pose_curr).transpose();
  const Eigen::Matrix3d rel = r_curr_t * r_prev;
  const Eigen::Vector3d offset = r_curr_t * (pose_prev.position - pose_curr.position);
  for (int i = 0; i < cam.height; ++i) {
    for (int j = 0; j < cam.width; ++j) {
      const double z = depth_prev(i, j);
      if (!std::isfinite(z)) continue;
      const Eigen::Vector2d xy = pixel_to_normalized(i, j, cam);
      const Eigen::Vector3d p = rel * Eigen::Vector3d(xy.x() * z, xy.y() * z, z) + offset;
      if (!(p.z() > 1e-9)) continue;
      const Eigen::Vector2d px = normalized_to_pixel({p.x() / p.z(), p.y() / p.z()}, cam);
      out.flow(i, j) = {px.x() - i, px.y() - j};
      out.valid(i, j) = 1;
    }
  }
  return out;
}

FlowField add_flow_noise(const FlowField& flow, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw DomainError("add_flow_noise: sigma must be non-negative");
  if (sigma == 0.0) return flow;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  FlowField out = flow;
  for (auto& f : out) {
    f.row += noise(rng);
    f.col += noise(rng);
  }
  return out;
}

}  // namespace flowservo
