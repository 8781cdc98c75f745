#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "flowservo/geometry.hpp"
#include "flowservo/scene.hpp"

namespace fs_test {

inline flowservo::CameraModel small_camera(int w = 64, int h = 48) {
  flowservo::CameraModel cam;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = w / 2.0;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  return cam;
}

inline flowservo::Building box(int id, Eigen::Vector3d lo, Eigen::Vector3d hi) { return {id, lo, hi}; }

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("flowservo_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fs_test
