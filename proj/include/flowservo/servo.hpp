#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flowservo/flow_synthesis.hpp"
#include "flowservo/geometry.hpp"
#include "flowservo/grid.hpp"

namespace flowservo {

/// 2x6 image Jacobian of a normalized point; columns ordered (vx, vy, vz, wx, wy, wz) in the
/// camera frame, rows (x_dot, y_dot).
using InteractionRow = Eigen::Matrix<double, 2, 6>;

InteractionRow interaction_matrix_at(double x, double y, double depth);

/// Pixel displacement per control interval caused by each of the four body command components,
/// at one pixel. Column k maps command component k to (f_row, f_col).
using CommandJacobian = Eigen::Matrix<double, 2, 4>;

CommandJacobian command_jacobian_at(int i, int j, double depth, const CameraModel& cam, double dt);

/// Horizon flow prediction with the interaction matrix frozen at the current depth proxy.
/// `commands.size()` must equal `horizon`. Invalid-depth pixels predict (0, 0).
FlowField predict_flow(const DepthProxyMap& depth_proxy, const CameraModel& cam,
                       std::span<const VelocityCommand> commands, int horizon, double dt);

struct LossReport {
  double loss = 0.0;
  int count = 0;
};

/// Mean Euclidean residual over valid pixels on the grid {i, j multiples of stride}.
LossReport flow_loss(const FlowField& predicted, const FlowField& desired, const ValidityGrid& validity,
                     int stride);

/// flow_loss(predict_flow(...)) specialised for repeated evaluation: the per-pixel Jacobians and
/// desired flow are gathered once on the strided grid.
class FlowServoObjective {
 public:
  /// `region`, when given, further restricts the evaluated pixels (e.g. to the obstacle mask).
  FlowServoObjective(const DepthProxyMap& depth_proxy, const FlowField& desired, const CameraModel& cam,
                     double dt, int stride, const ValidityGrid* region = nullptr);

  int pixel_count() const { return static_cast<int>(targets_.size()); }
  double operator()(std::span<const VelocityCommand> commands) const;

 private:
  std::vector<CommandJacobian> jacobians_;
  std::vector<Eigen::Vector2d> targets_;
};

struct CemConfig {
  int population = 100;  // N
  int elites = 10;       // K
  int iterations = 5;
  int horizon = 1;       // T
  double dt = 0.1;
  VelocityCommand init_mean{};
  VelocityCommand init_std{1.0, 1.0, 0.5, 0.3};
  VelocityCommand lower{-3.0, -3.0, -1.5, -0.8};
  VelocityCommand upper{3.0, 3.0, 1.5, 0.8};
  std::uint64_t seed = 0;
  bool elite_retention = true;
  // Optimise T independent commands instead of one command repeated T times.
  bool per_step = false;

  void validate() const;
  bool operator==(const CemConfig&) const = default;
};

struct CemResult {
  std::vector<VelocityCommand> best_sequence;
  double best_loss = 0.0;
  std::vector<double> trace;  // lowest loss in each iteration's population
  std::vector<VelocityCommand> final_mean;
};

using SequenceLoss = std::function<double(std::span<const VelocityCommand>)>;

/// Cross-entropy method over a diagonal Gaussian on (clamped) command sequences. Non-finite losses
/// are discarded; elites are the K lowest, ties broken by sample index.
CemResult cem_optimize(const SequenceLoss& loss_fn, const CemConfig& cfg);

}  // namespace flowservo
