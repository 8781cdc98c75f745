#pragma once

#include "flowservo/geometry.hpp"
#include "flowservo/grid.hpp"

namespace flowservo {

struct FlowBalanceConfig {
  double gain = 1.0;           // k
  double forward_speed = 3.0;  // m/s
  double yaw_rate_max = 0.8;   // rad/s
  double eps_denom = 1e-9;

  void validate() const;
  bool operator==(const FlowBalanceConfig&) const = default;
};

/// Left/right flow-magnitude balance k (wL - wR) / (wL + wR + eps), clamped. Positive values steer
/// right, i.e. away from a left half that carries more flow. The halves are the columns strictly
/// left and strictly right of the vertical centerline (W - 1) / 2; for odd W the middle column
/// belongs to neither.
double flow_balance_yaw_rate(const FlowField& flow, const ValidityGrid& validity, const FlowBalanceConfig& cfg);

/// Frame-to-frame flow balancing. `flow` is null on the first step.
VelocityCommand naive_flow_balance_step(const FlowField* flow, const ValidityGrid* validity,
                                        const FlowBalanceConfig& cfg);

/// Flow balancing driven by the synthesized desired flow radial * mask.
VelocityCommand radial_flow_balance_step(const ObstacleMask& mask, const FlowField& radial,
                                         const FlowBalanceConfig& cfg);

}  // namespace flowservo
