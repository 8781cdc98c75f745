#include "flowservo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flowservo/error.hpp"

namespace flowservo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kCemStream = 0x63656dULL;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

const char* to_string(Mode mode) { return mode == Mode::kAvoidance ? "Avoidance" : "GoalReaching"; }

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kOurs: return "ours";
    case ControllerKind::kNaiveFlowBalance: return "naive-fb";
    case ControllerKind::kRadialFlowBalance: return "radial-fb";
  }
  return "?";
}

ControllerKind controller_from_string(const std::string& s) {
  if (s == "ours") return ControllerKind::kOurs;
  if (s == "naive-fb") return ControllerKind::kNaiveFlowBalance;
  if (s == "radial-fb") return ControllerKind::kRadialFlowBalance;
  throw ConfigError("unknown controller '" + s + "' (expected ours, naive-fb or radial-fb)");
}

const char* to_string(LossRegion r) { return r == LossRegion::kMask ? "mask" : "valid"; }

LossRegion loss_region_from_string(const std::string& s) {
  if (s == "mask") return LossRegion::kMask;
  if (s == "valid") return LossRegion::kValid;
  throw DomainError("unknown loss region '" + s + "' (expected mask or valid)");
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kSuccess: return "Success";
    case Outcome::kCollision: return "Collision";
    case Outcome::kTimeout: return "Timeout";
  }
  return "?";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t step, std::uint64_t stream) {
  // splitmix64 finalizer over a simple combination
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (step + 1) + stream * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ModeState mode_select(const ObstacleMask& mask, double mask_threshold) {
  if (!(mask_threshold > 0.0 && mask_threshold < 1.0))
    throw DomainError("mode_select: mask threshold must lie in (0, 1)");
  const int h = mask.rows();
  const int w = mask.cols();
  const int i0 = h / 4;
  const int j0 = w / 4;
  const int ph = h / 2;
  const int pw = w / 2;
  long total = 0;
  long center = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!mask(i, j)) continue;
      ++total;
      if (i >= i0 && i < i0 + ph && j >= j0 && j < j0 + pw) ++center;
    }
  }
  ModeState s;
  s.mask_coverage = static_cast<double>(total) / (static_cast<double>(h) * w);
  s.center_coverage = ph * pw > 0 ? static_cast<double>(center) / (static_cast<double>(ph) * pw) : 0.0;
  s.mode = s.mask_coverage >= mask_threshold ? Mode::kAvoidance : Mode::kGoalReaching;
  return s;
}

VelocityCommand goal_controller(const Pose& pose, const Eigen::Vector3d& goal, const GoalGains& gains,
                                double v_max) {
  const Eigen::Vector3d delta = goal - pose.position;
  const double bearing = std::atan2(delta.y(), delta.x());
  const double err = wrap_angle(bearing - pose.yaw);
  VelocityCommand cmd;
  cmd.yaw_rate = std::clamp(gains.k_yaw * err, -gains.yaw_rate_max, gains.yaw_rate_max);
  cmd.v_fwd = v_max * std::max(0.0, std::cos(err));
  cmd.v_up = std::clamp(gains.k_z * delta.z(), -gains.v_up_max, gains.v_up_max);
  return cmd;
}

VelocityCommand damp_forward(const VelocityCommand& cmd, double center_coverage, double center_threshold,
                             double mu) {
  if (!(mu > 0.0 && mu <= 1.0)) throw DomainError("damp_forward: mu must lie in (0, 1]");
  VelocityCommand out = cmd;
  if (center_coverage >= center_threshold) out.v_fwd *= mu;
  return out;
}

void PipelineConfig::validate() const {
  auto wrap = [](const char* field, auto&& check) {
    try {
      check();
    } catch (const DomainError& e) {
      throw ConfigError(std::string(field) + ": " + e.what());
    }
  };
  wrap("camera", [&] { camera.validate(); });
  wrap("controller.lambda", [&] { RadialFlowParams{lambda, camera.height, camera.width}.validate(); });
  wrap("controller.cem", [&] { cem.validate(); });
  wrap("controller.flow_balance", [&] { flow_balance.validate(); });
  require(mask_threshold > 0.0 && mask_threshold < 1.0, "controller.mask_threshold: must lie in (0, 1)");
  require(center_threshold > 0.0 && center_threshold < 1.0, "controller.center_threshold: must lie in (0, 1)");
  require(forward_damping > 0.0 && forward_damping <= 1.0, "controller.forward_damping: must lie in (0, 1]");
  require(v_max >= 0.0 && std::isfinite(v_max), "controller.v_max: must be non-negative");
  require(goal.k_yaw > 0.0 && goal.k_z > 0.0, "controller.goal_gains: gains must be positive");
  require(goal.yaw_rate_max > 0.0 && goal.v_up_max > 0.0, "controller.goal_gains: clamps must be positive");
  require(loss_stride >= 1, "controller.loss_stride: must be >= 1");
  require(flow_depth.scale > 0.0, "controller.flowdepth_scale: must be positive");
  require(flow_depth.epsilon > 0.0, "controller.flowdepth_epsilon: must be positive");
  require(flow_noise_sigma >= 0.0, "flow_noise_sigma: must be non-negative");
}

void ScenarioConfig::validate(bool check_start_clearance) const {
  try {
    scene.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("buildings: ") + e.what());
  }
  pipeline.validate();
  require(termination.dt > 0.0, "termination.dt: must be positive");
  require(termination.goal_radius > 0.0, "termination.goal_radius: must be positive");
  require(termination.collision_radius >= 0.0, "termination.collision_radius: must be non-negative");
  require(termination.t_max > 0.0, "termination.t_max: must be positive");
  require(start.position.allFinite() && std::isfinite(start.yaw), "start: must be finite");
  require(goal.allFinite(), "goal: must be finite");
  require((goal - start.position).norm() > 0.0, "goal: must differ from the start position");
  if (!check_start_clearance) return;
  for (const auto& b : scene.buildings) {
    require(b.distance_to(start.position) > termination.collision_radius,
            "start: lies within collision_radius of building " + std::to_string(b.id));
  }
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return name == o.name && scene == o.scene && start == o.start && goal == o.goal && pipeline == o.pipeline &&
         termination == o.termination && seed == o.seed;
}

ClosedLoopController::ClosedLoopController(ControllerKind kind, PipelineConfig config, double dt,
                                           std::uint64_t seed)
    : kind_(kind), config_(std::move(config)), dt_(dt), seed_(seed) {
  config_.validate();
  if (!(dt_ > 0.0)) throw DomainError("ClosedLoopController: dt must be positive");
  config_.cem.dt = dt_;
  config_.flow_balance.forward_speed = config_.v_max;
  radial_ = radial_flow_field({config_.lambda, config_.camera.height, config_.camera.width});
}

ControlOutput ClosedLoopController::step(const Scene& scene, const Pose& pose, const Eigen::Vector3d& goal,
                                         bool capture_flows) {
  const CameraModel& cam = config_.camera;
  const int step = step_index_++;

  RenderResult view = render_depth_and_ids(scene, pose, cam);
  const auto boc = select_building_of_concern(scene, pose, heading_vector(pose));
  const ObstacleMask mask = render_obstacle_mask(view.ids, boc);
  ModeState mode = mode_select(mask, config_.mask_threshold);
  const bool first = !prev_pose_.has_value();
  if (first) mode.mode = Mode::kGoalReaching;

  ControlOutput out;
  out.log.mode = mode.mode;
  out.log.mask_coverage = mode.mask_coverage;
  out.log.center_coverage = mode.center_coverage;
  out.log.building_of_concern = boc;
  out.log.loss = kNaN;
  out.log.pose = pose;

  // Frame-to-frame flow estimate, t-1 -> t.
  std::optional<FlowResult> motion;
  if (!first) {
    motion = analytic_flow(*prev_pose_, pose, prev_depth_, cam);
    motion->flow = add_flow_noise(motion->flow, config_.flow_noise_sigma, derive_seed(seed_, step, kNoiseStream));
  }

  VelocityCommand cmd;
  if (mode.mode == Mode::kGoalReaching) {
    cmd = goal_controller(pose, goal, config_.goal, config_.v_max);
    prev_solution_ = cmd;
  } else {
    switch (kind_) {
      case ControllerKind::kOurs: {
        const FlowField target = desired_flow(radial_, mask);
        try {
          const DepthProxyMap proxy = flowdepth(motion->flow, motion->valid, config_.depth_mode, &view.depth,
                                                config_.flow_depth);
          const FlowServoObjective objective(proxy, target, cam, dt_, config_.loss_stride,
                                             config_.loss_region == LossRegion::kMask ? &mask : nullptr);
          CemConfig cem = config_.cem;
          cem.init_mean = prev_solution_;
          cem.seed = derive_seed(seed_, step, kCemStream);
          const CemResult res = cem_optimize(
              [&objective](std::span<const VelocityCommand> seq) { return objective(seq); }, cem);
          prev_solution_ = res.best_sequence.front();
          out.log.loss = res.best_loss;
          cmd = damp_forward(res.best_sequence.front(), mode.center_coverage, config_.center_threshold,
                             config_.forward_damping);
          if (capture_flows) {
            out.flows = StepFlows{target, predict_flow(proxy, cam, res.best_sequence, config_.cem.horizon, dt_)};
          }
        } catch (const std::exception&) {
          out.log.cem_failed = true;
          cmd = damp_forward(prev_command_, mode.center_coverage, config_.center_threshold,
                             config_.forward_damping);
        }
        break;
      }
      case ControllerKind::kNaiveFlowBalance:
        cmd = naive_flow_balance_step(motion ? &motion->flow : nullptr, motion ? &motion->valid : nullptr,
                                      config_.flow_balance);
        prev_solution_ = cmd;
        break;
      case ControllerKind::kRadialFlowBalance:
        cmd = radial_flow_balance_step(mask, radial_, config_.flow_balance);
        prev_solution_ = cmd;
        break;
    }
  }

  out.command = cmd;
  out.log.command = cmd;
  prev_pose_ = pose;
  prev_depth_ = std::move(view.depth);
  prev_command_ = cmd;
  return out;
}

EpisodeResult run_episode(const ScenarioConfig& scenario, ControllerKind controller, std::uint64_t seed,
                          const FlowObserver& observer) {
  scenario.validate(false);
  const TerminationConfig& term = scenario.termination;
  ClosedLoopController ctrl(controller, scenario.pipeline, term.dt, seed);

  EpisodeResult result;
  result.min_dist = std::numeric_limits<double>::infinity();
  Pose pose = scenario.start;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * term.dt;
    const double d = scenario.scene.distance_to_nearest(pose.position);
    result.min_dist = std::min(result.min_dist, d);
    if (!result.trajectory.empty())
      result.traj_length += (pose.position - result.trajectory.back().pose.position).norm();

    std::optional<Outcome> done;
    if (d <= term.collision_radius)
      done = Outcome::kCollision;
    else if ((pose.position - scenario.goal).norm() <= term.goal_radius)
      done = Outcome::kSuccess;
    else if (t > term.t_max)
      done = Outcome::kTimeout;

    if (done) {
      StepLog last;
      last.t = t;
      last.pose = pose;
      // The terminal row repeats the last perception state with a zero command.
      if (!result.trajectory.empty()) {
        const StepLog& prev = result.trajectory.back();
        last.mode = prev.mode;
        last.mask_coverage = prev.mask_coverage;
        last.center_coverage = prev.center_coverage;
        last.building_of_concern = prev.building_of_concern;
      }
      last.loss = kNaN;
      last.min_dist = d;
      result.trajectory.push_back(last);
      result.outcome = *done;
      break;
    }

    ControlOutput out = ctrl.step(scenario.scene, pose, scenario.goal, static_cast<bool>(observer));
    out.log.t = t;
    out.log.min_dist = d;
    if (out.log.cem_failed) ++result.cem_failures;
    if (observer && out.flows) observer(static_cast<int>(k), *out.flows);
    result.trajectory.push_back(out.log);
    pose = integrate_pose(pose, out.command, term.dt);
  }
  return result;
}

}  // namespace flowservo
