#include <doctest.h>

#include <cmath>
#include <numbers>

#include "flowservo/bench.hpp"
#include "flowservo/error.hpp"
#include "flowservo/pipeline.hpp"
#include "support.hpp"

using namespace flowservo;
using fs_test::box;

namespace {

ScenarioConfig small_scenario(Scene scene, Eigen::Vector3d goal) {
  ScenarioConfig s;
  s.scene = std::move(scene);
  s.start = Pose{{0, 0, 10}, 0.0};
  s.goal = goal;
  s.pipeline.camera = fs_test::small_camera(96, 72);
  s.pipeline.loss_stride = 2;
  s.seed = 17;
  return s;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("mode_select") {
  ModeState s = mode_select(ObstacleMask(48, 64, 0), 0.02);
  CHECK(s.mode == Mode::kGoalReaching);
  CHECK(s.mask_coverage == 0.0);
  CHECK(s.center_coverage == 0.0);

  s = mode_select(ObstacleMask(48, 64, 1), 0.02);
  CHECK(s.mode == Mode::kAvoidance);
  CHECK(s.mask_coverage == 1.0);
  CHECK(s.center_coverage == 1.0);

  ObstacleMask patch(48, 64, 0);
  for (int i = 12; i < 36; ++i)
    for (int j = 16; j < 48; ++j) patch(i, j) = 1;
  s = mode_select(patch, 0.05);
  CHECK(s.mask_coverage == doctest::Approx(0.25));
  CHECK(s.center_coverage == doctest::Approx(1.0));
  CHECK(s.mode == Mode::kAvoidance);

  CHECK_THROWS_AS(mode_select(patch, 0.0), DomainError);
}

TEST_CASE("goal_controller") {
  const GoalGains g;
  CHECK(goal_controller(Pose{{0, 0, 10}, 0}, {50, 0, 10}, g, 3.0) == VelocityCommand{3.0, 0, 0, 0});

  const VelocityCommand back = goal_controller(Pose{{0, 0, 10}, 0}, {-50, 0, 10}, g, 3.0);
  CHECK(back.v_fwd == doctest::Approx(0.0));
  CHECK(std::abs(back.yaw_rate) == doctest::Approx(std::min(g.k_yaw * std::numbers::pi, g.yaw_rate_max)));

  const VelocityCommand up = goal_controller(Pose{{0, 0, 10}, 0}, {50, 50, 11}, g, 2.0);
  CHECK(up.v_fwd == doctest::Approx(2.0 * std::cos(std::numbers::pi / 4)));
  CHECK(up.yaw_rate == doctest::Approx(std::min(g.k_yaw * std::numbers::pi / 4, g.yaw_rate_max)));
  CHECK(up.v_up == doctest::Approx(g.k_z * 1.0));
  CHECK(up.v_left == 0.0);
  CHECK(goal_controller(Pose{{0, 0, 10}, 0}, {50, 0, 100}, g, 2.0).v_up == g.v_up_max);
}

TEST_CASE("damp_forward") {
  const VelocityCommand c{2, 1, -1, 0.3};
  CHECK(damp_forward(c, 0.0, 0.15, 0.5) == c);
  CHECK(damp_forward(c, 1.0, 0.15, 0.5) == VelocityCommand{1, 1, -1, 0.3});
  CHECK(damp_forward(c, 1.0, 0.15, 1.0) == c);
  CHECK_THROWS_AS(damp_forward(c, 1.0, 0.15, 0.0), DomainError);
}

TEST_CASE("enum names round trip") {
  for (auto k : {ControllerKind::kOurs, ControllerKind::kNaiveFlowBalance, ControllerKind::kRadialFlowBalance})
    CHECK(controller_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(controller_from_string("pid"), ConfigError);
  CHECK(loss_region_from_string(to_string(LossRegion::kValid)) == LossRegion::kValid);
  CHECK(loss_region_from_string(to_string(LossRegion::kMask)) == LossRegion::kMask);
  CHECK_THROWS_AS(loss_region_from_string("all"), DomainError);
}

TEST_CASE("control step: obstacle filling the left half commands rightward motion") {
  PipelineConfig cfg;
  cfg.camera = fs_test::small_camera(96, 72);
  cfg.loss_stride = 2;
  Scene s;
  s.buildings = {box(1, {25, 0.2, -40}, {45, 60, 80})};
  for (auto region : {LossRegion::kMask, LossRegion::kValid}) {
    cfg.loss_region = region;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ClosedLoopController ctrl(ControllerKind::kOurs, cfg, 0.1, seed);
      const Pose p0{{0, 0, 10}, 0.0};
      ctrl.step(s, p0, {200, 0, 10});  // first step is always goal reaching
      const ControlOutput out = ctrl.step(s, integrate_pose(p0, {3, 0, 0, 0}, 0.1), {200, 0, 10}, true);
      CHECK(out.log.mode == Mode::kAvoidance);
      CHECK(out.log.building_of_concern == 1);
      CHECK(out.command.v_left < 0.0);
      CHECK(std::isfinite(out.log.loss));
      REQUIRE(out.flows);
      CHECK(out.flows->desired.same_shape(72, 96));
    }
  }
}

TEST_CASE("control step: damping applies to a centered obstacle") {
  PipelineConfig cfg;
  cfg.camera = fs_test::small_camera(96, 72);
  cfg.loss_stride = 2;
  Scene s;
  s.buildings = {box(1, {30, -10, 0}, {40, 10, 30})};
  ClosedLoopController raw(ControllerKind::kOurs, [&] { auto c = cfg; c.forward_damping = 1.0; return c; }(), 0.1, 3);
  ClosedLoopController damped(ControllerKind::kOurs, cfg, 0.1, 3);
  const Pose p0{{0, 0, 10}, 0.0};
  const Pose p1 = integrate_pose(p0, {3, 0, 0, 0}, 0.1);
  raw.step(s, p0, {200, 0, 10});
  damped.step(s, p0, {200, 0, 10});
  const ControlOutput a = raw.step(s, p1, {200, 0, 10});
  const ControlOutput b = damped.step(s, p1, {200, 0, 10});
  REQUIRE(a.log.center_coverage >= cfg.center_threshold);
  if (a.command.v_fwd > 0) CHECK(b.command.v_fwd < a.command.v_fwd);
  CHECK(b.command.v_fwd == doctest::Approx(cfg.forward_damping * a.command.v_fwd));
}

TEST_CASE("run_episode: empty scene flies straight to the goal") {
  const ScenarioConfig sc = small_scenario(Scene{}, {20, 0, 10});
  for (auto kind : {ControllerKind::kOurs, ControllerKind::kNaiveFlowBalance, ControllerKind::kRadialFlowBalance}) {
    const EpisodeResult r = run_episode(sc, kind, sc.seed);
    CHECK(r.outcome == Outcome::kSuccess);
    CHECK(r.traj_length >= 15.0 - 1e-9);  // goal radius 5 m
    CHECK(r.traj_length <= 21.0);
    for (const auto& step : r.trajectory) CHECK(step.mode == Mode::kGoalReaching);
    CHECK(r.trajectory.back().command == VelocityCommand{});
    CHECK((r.trajectory.back().pose.position - sc.goal).norm() <= sc.termination.goal_radius);
  }
}

TEST_CASE("run_episode: goal 20 m ahead with a tight goal radius") {
  ScenarioConfig sc = small_scenario(Scene{}, {20, 0, 10});
  sc.termination.goal_radius = 0.2;
  const EpisodeResult r = run_episode(sc, ControllerKind::kOurs, 1);
  CHECK(r.outcome == Outcome::kSuccess);
  CHECK(r.traj_length >= 19.8);
  CHECK(r.traj_length <= 21.0);
}

TEST_CASE("run_episode: start inside the collision radius collides immediately") {
  Scene s;
  s.buildings = {box(1, {0.3, -5, 0}, {10, 5, 30})};
  const ScenarioConfig sc = small_scenario(s, {50, 0, 10});
  CHECK_THROWS_WITH_AS(sc.validate(), doctest::Contains("building 1"), ConfigError);
  CHECK_NOTHROW(sc.validate(false));
  const EpisodeResult r = run_episode(sc, ControllerKind::kOurs, 1);
  CHECK(r.outcome == Outcome::kCollision);
  CHECK(r.traj_length == 0.0);
  CHECK(r.trajectory.size() == 1);
}

TEST_CASE("run_episode: zero speed times out") {
  ScenarioConfig sc = small_scenario(Scene{}, {20, 0, 10});
  sc.pipeline.v_max = 0.0;
  sc.termination.t_max = 3.0;
  const EpisodeResult r = run_episode(sc, ControllerKind::kOurs, 1);
  CHECK(r.outcome == Outcome::kTimeout);
  CHECK(r.traj_length == 0.0);
  CHECK(r.trajectory.back().t > sc.termination.t_max);
}

TEST_CASE("run_episode: logged trajectory reproduces the metrics and invariants") {
  Scene s;
  s.buildings = {box(1, {30, -8, 0}, {45, 12, 40})};
  const ScenarioConfig sc = small_scenario(s, {80, 0, 10});
  for (auto kind : {ControllerKind::kOurs, ControllerKind::kRadialFlowBalance}) {
    const EpisodeResult r = run_episode(sc, kind, 5);
    const auto positions = trajectory_positions(r);
    const TrajectoryMetrics m = compute_metrics(positions, sc.scene);
    CHECK(std::abs(m.min_dist - r.min_dist) <= 1e-9);
    CHECK(std::abs(m.traj_length - r.traj_length) <= 1e-9);
    if (r.outcome == Outcome::kSuccess) {
      for (const auto& step : r.trajectory) CHECK(step.min_dist > sc.termination.collision_radius);
    }
    for (const auto& step : r.trajectory) {
      if (step.mask_coverage == 0.0) CHECK(step.mode == Mode::kGoalReaching);
      CHECK(step.mask_coverage >= 0.0);
      CHECK(step.mask_coverage <= 1.0);
      if (step.mode == Mode::kAvoidance) CHECK(step.mask_coverage >= sc.pipeline.mask_threshold);
    }
    CHECK(r.trajectory.front().t == 0.0);
  }
}

TEST_CASE("run_episode is deterministic") {
  Scene s;
  s.buildings = {box(1, {30, -8, 0}, {45, 12, 40})};
  ScenarioConfig sc = small_scenario(s, {80, 0, 10});
  sc.pipeline.flow_noise_sigma = 0.5;
  sc.termination.t_max = 8.0;
  for (auto kind : {ControllerKind::kOurs, ControllerKind::kNaiveFlowBalance}) {
    const EpisodeResult a = run_episode(sc, kind, 9), b = run_episode(sc, kind, 9);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
      CHECK(a.trajectory[k].pose == b.trajectory[k].pose);
      CHECK(a.trajectory[k].command == b.trajectory[k].command);
    }
  }
}

TEST_CASE("ScenarioConfig::validate names the offending field") {
  ScenarioConfig sc = small_scenario(Scene{}, {20, 0, 10});
  CHECK_NOTHROW(sc.validate());
  sc.goal = sc.start.position;
  CHECK_THROWS_WITH_AS(sc.validate(), doctest::Contains("goal"), ConfigError);
  sc = small_scenario(Scene{}, {20, 0, 10});
  sc.pipeline.forward_damping = 1.5;
  CHECK_THROWS_WITH_AS(sc.validate(), doctest::Contains("controller.forward_damping"), ConfigError);
  sc = small_scenario(Scene{}, {20, 0, 10});
  sc.scene.buildings = {box(4, {-1, -1, 0}, {1, 1, 20})};
  CHECK_THROWS_WITH_AS(sc.validate(), doctest::Contains("building 4"), ConfigError);
  sc = small_scenario(Scene{}, {20, 0, 10});
  sc.termination.dt = 0;
  CHECK_THROWS_WITH_AS(sc.validate(), doctest::Contains("termination.dt"), ConfigError);
}

TEST_CASE("derive_seed separates steps and streams") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

}  // TEST_SUITE
