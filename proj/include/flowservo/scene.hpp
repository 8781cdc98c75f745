#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "flowservo/geometry.hpp"
#include "flowservo/grid.hpp"

namespace flowservo {

/// Axis-aligned box obstacle. Ids are non-negative.
struct Building {
  int id = 0;
  Eigen::Vector3d min_corner = Eigen::Vector3d::Zero();
  Eigen::Vector3d max_corner = Eigen::Vector3d::Zero();

  bool contains(const Eigen::Vector3d& p) const;
  /// Euclidean distance from p to the box, zero inside.
  double distance_to(const Eigen::Vector3d& p) const;

  bool operator==(const Building& o) const {
    return id == o.id && min_corner == o.min_corner && max_corner == o.max_corner;
  }
};

struct Scene {
  std::vector<Building> buildings;
  double detection_range = 120.0;                             // D_max, meters
  double corridor_half_angle = 15.0 * std::numbers::pi / 180.0;  // theta_c, radians

  void validate() const;
  /// Minimum point-to-box distance over all buildings; +inf for an empty scene.
  double distance_to_nearest(const Eigen::Vector3d& p) const;

  bool operator==(const Scene&) const = default;
};

constexpr std::int32_t kNoBuilding = -1;
using IdBuffer = Grid<std::int32_t>;

struct RenderResult {
  DepthMap depth;  // z-depth along the optical axis, +inf where nothing is hit
  IdBuffer ids;    // kNoBuilding where nothing is hit
};

struct FlowResult {
  FlowField flow;
  ValidityGrid valid;
};

/// Slab test. Returns the entry distance, 0 when the origin is inside, nullopt on a miss.
std::optional<double> ray_box_intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                        const Building& box);

struct RayHit {
  double distance;
  int building_id;
};

/// Nearest building along a ray, ties broken by the lower id.
std::optional<RayHit> cast_ray(const Scene& scene, const Eigen::Vector3d& origin,
                               const Eigen::Vector3d& direction);

RenderResult render_depth_and_ids(const Scene& scene, const Pose& camera_pose, const CameraModel& cam);

/// Geometric stand-in for a learned "building of concern" detector: the nearest building hit by a
/// dense bundle of rays inside the forward cone of half-angle theta_c, within D_max.
std::optional<int> select_building_of_concern(const Scene& scene, const Pose& pose,
                                              const Eigen::Vector3d& heading);

ObstacleMask render_obstacle_mask(const IdBuffer& ids, std::optional<int> boc);

/// Reprojection flow from the camera at pose_prev to the camera at pose_curr, indexed at the
/// previous-frame pixel. Pixels with infinite depth or landing behind the camera are invalid.
FlowResult analytic_flow(const Pose& pose_prev, const Pose& pose_curr, const DepthMap& depth_prev,
                         const CameraModel& cam);

/// Adds i.i.d. N(0, sigma^2) noise to each component, reproducible from seed.
FlowField add_flow_noise(const FlowField& flow, double sigma, std::uint64_t seed);

}  // namespace flowservo
