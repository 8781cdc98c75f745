#include "flowservo/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "flowservo/error.hpp"
#include "flowservo/flow_synthesis.hpp"

namespace flowservo {

void FlowBalanceConfig::validate() const {
  if (!(gain > 0.0)) throw DomainError("FlowBalanceConfig: gain must be positive");
  if (!(eps_denom > 0.0)) throw DomainError("FlowBalanceConfig: eps_denom must be positive");
  if (!(yaw_rate_max > 0.0)) throw DomainError("FlowBalanceConfig: yaw_rate_max must be positive");
}

double flow_balance_yaw_rate(const FlowField& flow, const ValidityGrid& validity, const FlowBalanceConfig& cfg) {
  require_same_shape(flow, validity, "flow_balance_yaw_rate");
  const int w = flow.cols();
  double left = 0.0;
  double right = 0.0;
  for (int i = 0; i < flow.rows(); ++i) {
    for (int j = 0; j < w; ++j) {
      if (!validity(i, j)) continue;
      const double m = std::hypot(flow(i, j).row, flow(i, j).col);
      if (2 * j + 1 < w)
        left += m;
      else if (2 * j + 1 > w)
        right += m;
    }
  }
  const double rate = cfg.gain * (left - right) / (left + right + cfg.eps_denom);
  return std::clamp(rate, -cfg.yaw_rate_max, cfg.yaw_rate_max);
}

VelocityCommand naive_flow_balance_step(const FlowField* flow, const ValidityGrid* validity,
                                        const FlowBalanceConfig& cfg) {
  VelocityCommand cmd{cfg.forward_speed, 0.0, 0.0, 0.0};
  if (flow == nullptr || validity == nullptr) return cmd;
  cmd.yaw_rate = -flow_balance_yaw_rate(*flow, *validity, cfg);
  return cmd;
}

VelocityCommand radial_flow_balance_step(const ObstacleMask& mask, const FlowField& radial,
                                         const FlowBalanceConfig& cfg) {
  const FlowField target = desired_flow(radial, mask);
  const ValidityGrid all(target.rows(), target.cols(), 1);
  return {cfg.forward_speed, 0.0, 0.0, -flow_balance_yaw_rate(target, all, cfg)};
}

}  // namespace flowservo
