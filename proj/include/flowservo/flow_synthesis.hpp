#pragma once

#include <string>

#include "flowservo/grid.hpp"

namespace flowservo {

struct RadialFlowParams {
  double lambda = 10.0;  // horizontal amplification, >= 1
  int height = 192;
  int width = 256;

  void validate() const;
};

/// Outward flow from the image center (H/2, W/2), integer division, with the column component
/// scaled by lambda and both components divided by the unscaled radius. The center pixel is (0, 0).
FlowField radial_flow_field(const RadialFlowParams& params);

/// Radial flow restricted to the obstacle mask, zero elsewhere.
FlowField desired_flow(const FlowField& radial, const ObstacleMask& mask);

enum class DepthMode { kFlowDepth, kTrueDepth };

const char* to_string(DepthMode mode);
DepthMode depth_mode_from_string(const std::string& s);

struct FlowDepthParams {
  double scale = 1.0;     // c_z
  double epsilon = 1e-3;  // keeps zero-flow pixels finite

  bool operator==(const FlowDepthParams&) const = default;
};

struct DepthProxyMap {
  DepthMap depth;
  ValidityGrid valid;
  DepthMode mode = DepthMode::kTrueDepth;
};

/// Per-pixel depth proxy: c_z / (|flow| + eps) in flow-depth mode, or a passthrough of the finite
/// entries of `true_depth` in true-depth mode.
DepthProxyMap flowdepth(const FlowField& flow, const ValidityGrid& validity, DepthMode mode,
                        const DepthMap* true_depth, const FlowDepthParams& params = {});

}  // namespace flowservo
