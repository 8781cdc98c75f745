#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowservo/baselines.hpp"
#include "flowservo/flow_synthesis.hpp"
#include "flowservo/geometry.hpp"
#include "flowservo/scene.hpp"
#include "flowservo/servo.hpp"

namespace flowservo {

enum class Mode { kGoalReaching, kAvoidance };
const char* to_string(Mode mode);

enum class ControllerKind { kOurs, kNaiveFlowBalance, kRadialFlowBalance };
const char* to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& s);

struct ModeState {
  Mode mode = Mode::kGoalReaching;
  double mask_coverage = 0.0;
  double center_coverage = 0.0;
};

/// Coverage of the whole frame and of the central H/2 x W/2 window; avoidance iff the whole-frame
/// coverage reaches mask_threshold.
ModeState mode_select(const ObstacleMask& mask, double mask_threshold);

struct GoalGains {
  double k_yaw = 1.0;
  double k_z = 0.5;
  double yaw_rate_max = 0.8;
  double v_up_max = 1.5;

  bool operator==(const GoalGains&) const = default;
};

VelocityCommand goal_controller(const Pose& pose, const Eigen::Vector3d& goal, const GoalGains& gains,
                                double v_max);

/// Scales v_fwd by mu when the central window coverage reaches center_threshold.
VelocityCommand damp_forward(const VelocityCommand& cmd, double center_coverage, double center_threshold,
                             double mu);

/// Pixels entering the servo loss: the obstacle mask only, or every pixel with valid flow.
enum class LossRegion { kMask, kValid };

const char* to_string(LossRegion r);
LossRegion loss_region_from_string(const std::string& s);

struct PipelineConfig {
  CameraModel camera;
  double lambda = 10.0;
  double mask_threshold = 0.02;    // tau_mask
  double center_threshold = 0.15;  // tau_center
  double forward_damping = 0.5;    // mu
  double v_max = 3.0;
  GoalGains goal;
  CemConfig cem{.horizon = 3};
  int loss_stride = 4;
  LossRegion loss_region = LossRegion::kMask;
  DepthMode depth_mode = DepthMode::kTrueDepth;
  FlowDepthParams flow_depth;
  FlowBalanceConfig flow_balance;
  double flow_noise_sigma = 0.0;  // pixels, applied to the frame-to-frame flow estimate only

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

struct TerminationConfig {
  double dt = 0.1;
  double goal_radius = 5.0;
  double collision_radius = 0.5;
  double t_max = 120.0;

  bool operator==(const TerminationConfig&) const = default;
};

struct StepLog {
  double t = 0.0;
  Pose pose;
  VelocityCommand command;
  Mode mode = Mode::kGoalReaching;
  double mask_coverage = 0.0;
  double center_coverage = 0.0;
  double loss = 0.0;  // NaN unless the flow servo ran
  double min_dist = 0.0;
  std::optional<int> building_of_concern;
  bool cem_failed = false;
};

/// Desired and predicted flow of one avoidance step, for inspection dumps.
struct StepFlows {
  FlowField desired;
  FlowField predicted;
};

struct ControlOutput {
  VelocityCommand command;
  StepLog log;
  std::optional<StepFlows> flows;
};

/// Stateful closed-loop controller: keeps the previous frame for the frame-to-frame flow and the
/// previous solution for warm starting the sampler.
class ClosedLoopController {
 public:
  ClosedLoopController(ControllerKind kind, PipelineConfig config, double dt, std::uint64_t seed);

  ControlOutput step(const Scene& scene, const Pose& pose, const Eigen::Vector3d& goal, bool capture_flows = false);

  int step_index() const { return step_index_; }

 private:
  ControllerKind kind_;
  PipelineConfig config_;
  double dt_;
  std::uint64_t seed_;
  FlowField radial_;
  int step_index_ = 0;
  std::optional<Pose> prev_pose_;
  DepthMap prev_depth_;
  VelocityCommand prev_command_;
  VelocityCommand prev_solution_;
};

/// Everything needed to fly one episode.
struct ScenarioConfig {
  std::string name = "scenario";
  Scene scene;
  Pose start;
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  PipelineConfig pipeline;
  TerminationConfig termination;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field. The start clearance check can be skipped so that
  /// an episode starting in contact reports a collision instead of a config error.
  void validate(bool check_start_clearance = true) const;
  bool operator==(const ScenarioConfig& o) const;
};

enum class Outcome { kSuccess, kCollision, kTimeout };
const char* to_string(Outcome outcome);

struct EpisodeResult {
  Outcome outcome = Outcome::kTimeout;
  std::vector<StepLog> trajectory;
  double min_dist = 0.0;
  double traj_length = 0.0;
  int cem_failures = 0;
};

using FlowObserver = std::function<void(int step, const StepFlows&)>;

/// Runs control_step + integrate_pose at fixed dt until success, collision or timeout. The last
/// trajectory row is the terminal state and carries a zero command.
EpisodeResult run_episode(const ScenarioConfig& scenario, ControllerKind controller, std::uint64_t seed,
                          const FlowObserver& observer = {});

/// Mixes a base seed with a step index and a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t step, std::uint64_t stream);

}  // namespace flowservo
