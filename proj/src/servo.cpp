#include "flowservo/servo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "flowservo/error.hpp"

namespace flowservo {

InteractionRow interaction_matrix_at(double x, double y, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw DomainError("interaction_matrix_at: depth must be positive and finite");
  const double inv = 1.0 / depth;
  InteractionRow l;
  l << -inv, 0.0, x * inv, x * y, -(1.0 + x * x), y,
       0.0, -inv, y * inv, 1.0 + y * y, -x * y, -x;
  return l;
}

CommandJacobian command_jacobian_at(int i, int j, double depth, const CameraModel& cam, double dt) {
  const Eigen::Vector2d xy = pixel_to_normalized(i, j, cam);
  const InteractionRow l = interaction_matrix_at(xy.x(), xy.y(), depth);
  CommandJacobian jac;
  for (int k = 0; k < VelocityCommand::kDim; ++k) {
    std::array<double, 4> unit{};
    unit[static_cast<std::size_t>(k)] = 1.0;
    const Twist tw = body_twist_to_camera_twist(VelocityCommand::from_array(unit));
    Eigen::Matrix<double, 6, 1> screw;
    screw << tw.linear, tw.angular;
    const Eigen::Vector2d xy_dot = l * screw;
    jac(0, k) = cam.fy * xy_dot.y() * dt;
    jac(1, k) = cam.fx * xy_dot.x() * dt;
  }
  return jac;
}

namespace {

Eigen::Vector4d summed_command(std::span<const VelocityCommand> commands) {
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  for (const auto& c : commands) sum += Eigen::Vector4d(c.v_fwd, c.v_left, c.v_up, c.yaw_rate);
  return sum;
}

}  // namespace

FlowField predict_flow(const DepthProxyMap& depth_proxy, const CameraModel& cam,
                       std::span<const VelocityCommand> commands, int horizon, double dt) {
  cam.validate();
  if (horizon < 1 || static_cast<int>(commands.size()) != horizon)
    throw DomainError("predict_flow: expected " + std::to_string(horizon) + " commands, got " +
                      std::to_string(commands.size()));
  if (!depth_proxy.depth.same_shape(cam.height, cam.width))
    throw DomainError("predict_flow: depth proxy does not match the camera model");
  // L is frozen over the horizon, so the prediction only depends on the summed command.
  const Eigen::Vector4d sum = summed_command(commands);
  FlowField out(cam.height, cam.width);
  for (int i = 0; i < cam.height; ++i) {
    for (int j = 0; j < cam.width; ++j) {
      if (!depth_proxy.valid(i, j)) continue;
      const Eigen::Vector2d f = command_jacobian_at(i, j, depth_proxy.depth(i, j), cam, dt) * sum;
      out(i, j) = {f.x(), f.y()};
    }
  }
  return out;
}

LossReport flow_loss(const FlowField& predicted, const FlowField& desired, const ValidityGrid& validity,
                     int stride) {
  require_same_shape(predicted, desired, "flow_loss");
  require_same_shape(predicted, validity, "flow_loss");
  if (stride < 1) throw DomainError("flow_loss: stride must be >= 1");
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < predicted.rows(); i += stride) {
    for (int j = 0; j < predicted.cols(); j += stride) {
      if (!validity(i, j)) continue;
      sum += std::hypot(predicted(i, j).row - desired(i, j).row, predicted(i, j).col - desired(i, j).col);
      ++count;
    }
  }
  if (count == 0) throw DomainError("flow_loss: no valid pixels to evaluate");
  return {sum / count, count};
}

FlowServoObjective::FlowServoObjective(const DepthProxyMap& depth_proxy, const FlowField& desired,
                                       const CameraModel& cam, double dt, int stride,
                                       const ValidityGrid* region) {
  require_same_shape(depth_proxy.depth, desired, "FlowServoObjective");
  if (!desired.same_shape(cam.height, cam.width))
    throw DomainError("FlowServoObjective: desired flow does not match the camera model");
  if (stride < 1) throw DomainError("FlowServoObjective: stride must be >= 1");
  for (int i = 0; i < cam.height; i += stride) {
    for (int j = 0; j < cam.width; j += stride) {
      if (!depth_proxy.valid(i, j) || (region != nullptr && !(*region)(i, j))) continue;
      jacobians_.push_back(command_jacobian_at(i, j, depth_proxy.depth(i, j), cam, dt));
      targets_.emplace_back(desired(i, j).row, desired(i, j).col);
    }
  }
  if (targets_.empty()) throw DomainError("FlowServoObjective: no valid pixels to evaluate");
}

double FlowServoObjective::operator()(std::span<const VelocityCommand> commands) const {
  const Eigen::Vector4d sum = summed_command(commands);
  double total = 0.0;
  for (std::size_t k = 0; k < targets_.size(); ++k) total += (jacobians_[k] * sum - targets_[k]).norm();
  return total / static_cast<double>(targets_.size());
}

void CemConfig::validate() const {
  if (population < 1 || elites < 1 || elites > population)
    throw DomainError("CemConfig: need 1 <= elites <= population");
  if (iterations < 1) throw DomainError("CemConfig: iterations must be >= 1");
  if (horizon < 1) throw DomainError("CemConfig: horizon must be >= 1");
  if (!(dt > 0.0)) throw DomainError("CemConfig: dt must be positive");
  for (int k = 0; k < VelocityCommand::kDim; ++k) {
    if (!(lower[k] <= upper[k])) throw DomainError("CemConfig: lower bound exceeds upper bound");
    if (!(init_std[k] > 0.0)) throw DomainError("CemConfig: init_std must be positive");
  }
}

CemResult cem_optimize(const SequenceLoss& loss_fn, const CemConfig& cfg) {
  cfg.validate();
  constexpr int kCmd = VelocityCommand::kDim;
  const int steps = cfg.per_step ? cfg.horizon : 1;
  const int dim = steps * kCmd;

  std::vector<double> mean(static_cast<std::size_t>(dim));
  std::vector<double> stddev(static_cast<std::size_t>(dim));
  std::vector<double> lo(static_cast<std::size_t>(dim));
  std::vector<double> hi(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) {
    mean[d] = cfg.init_mean[d % kCmd];
    stddev[d] = cfg.init_std[d % kCmd];
    lo[d] = cfg.lower[d % kCmd];
    hi[d] = cfg.upper[d % kCmd];
  }

  auto to_sequence = [&](const std::vector<double>& v) {
    std::vector<VelocityCommand> seq(static_cast<std::size_t>(cfg.horizon));
    for (int t = 0; t < cfg.horizon; ++t) {
      const int base = (cfg.per_step ? t : 0) * kCmd;
      seq[t] = {v[base], v[base + 1], v[base + 2], v[base + 3]};
    }
    return seq;
  };

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> samples(static_cast<std::size_t>(cfg.population),
                                           std::vector<double>(static_cast<std::size_t>(dim)));
  std::vector<double> losses(static_cast<std::size_t>(cfg.population));
  std::vector<int> order;

  CemResult result;
  std::vector<double> best;
  double best_loss = std::numeric_limits<double>::infinity();

  for (int it = 0; it < cfg.iterations; ++it) {
    for (auto& s : samples)
      for (int d = 0; d < dim; ++d) s[d] = std::clamp(mean[d] + stddev[d] * unit(rng), lo[d], hi[d]);
    if (cfg.elite_retention && !best.empty()) samples[0] = best;

    order.clear();
    for (int n = 0; n < cfg.population; ++n) {
      const double l = loss_fn(to_sequence(samples[n]));
      losses[n] = l;
      if (std::isfinite(l)) order.push_back(n);
    }
    if (order.empty())
      throw OptimizationError("cem_optimize: every sample in iteration " + std::to_string(it) +
                              " produced a non-finite loss");
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return losses[a] < losses[b]; });

    const int head = order.front();
    result.trace.push_back(losses[head]);
    if (losses[head] < best_loss) {
      best_loss = losses[head];
      best = samples[head];
    }

    const int k_eff = std::min<int>(cfg.elites, static_cast<int>(order.size()));
    for (int d = 0; d < dim; ++d) {
      double m = 0.0;
      for (int e = 0; e < k_eff; ++e) m += samples[order[e]][d];
      m /= k_eff;
      double var = 0.0;
      for (int e = 0; e < k_eff; ++e) var += (samples[order[e]][d] - m) * (samples[order[e]][d] - m);
      mean[d] = m;
      stddev[d] = std::sqrt(var / k_eff);
    }
  }

  result.best_sequence = to_sequence(best);
  result.best_loss = best_loss;
  result.final_mean = to_sequence(mean);
  return result;
}

}  // namespace flowservo
