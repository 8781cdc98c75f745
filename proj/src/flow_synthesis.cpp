#include "flowservo/flow_synthesis.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "flowservo/error.hpp"

namespace flowservo {

void RadialFlowParams::validate() const {
  if (!(lambda >= 1.0)) throw DomainError("RadialFlowParams: lambda must be >= 1");
  if (height < 2 || width < 2) throw DomainError("RadialFlowParams: H and W must be >= 2");
}

FlowField radial_flow_field(const RadialFlowParams& params) {
  params.validate();
  const int ci = params.height / 2;
  const int cj = params.width / 2;
  FlowField out(params.height, params.width);
  for (int i = 0; i < params.height; ++i) {
    const double di = i - ci;
    for (int j = 0; j < params.width; ++j) {
      const double dj = j - cj;
      const double n = std::sqrt(di * di + dj * dj);
      if (n == 0.0) continue;
      out(i, j) = {di / n, params.lambda * dj / n};
    }
  }
  return out;
}

FlowField desired_flow(const FlowField& radial, const ObstacleMask& mask) {
  require_same_shape(radial, mask, "desired_flow");
  FlowField out(radial.rows(), radial.cols());
  auto m = mask.begin();
  auto o = out.begin();
  for (const auto& r : radial) {
    if (*m++) *o = r;
    ++o;
  }
  return out;
}

const char* to_string(DepthMode mode) {
  return mode == DepthMode::kFlowDepth ? "flowdepth" : "true";
}

DepthMode depth_mode_from_string(const std::string& s) {
  if (s == "flowdepth") return DepthMode::kFlowDepth;
  if (s == "true") return DepthMode::kTrueDepth;
  throw DomainError("unknown depth mode '" + s + "' (expected flowdepth or true)");
}

DepthProxyMap flowdepth(const FlowField& flow, const ValidityGrid& validity, DepthMode mode,
                        const DepthMap* true_depth, const FlowDepthParams& params) {
  DepthProxyMap out;
  out.mode = mode;
  if (mode == DepthMode::kTrueDepth) {
    if (true_depth == nullptr) throw DomainError("flowdepth: true-depth mode requires a depth map");
    out.depth = *true_depth;
    out.valid = ValidityGrid(true_depth->rows(), true_depth->cols(), 0);
    auto v = out.valid.begin();
    for (double z : *true_depth) *v++ = (std::isfinite(z) && z > 0.0) ? 1 : 0;
    return out;
  }
  require_same_shape(flow, validity, "flowdepth");
  if (!(params.scale > 0.0) || !(params.epsilon > 0.0))
    throw DomainError("flowdepth: scale and epsilon must be positive");
  out.depth = DepthMap(flow.rows(), flow.cols(), std::numeric_limits<double>::infinity());
  out.valid = validity;
  auto d = out.depth.begin();
  auto v = validity.begin();
  for (const auto& f : flow) {
    if (*v++) *d = params.scale / (std::hypot(f.row, f.col) + params.epsilon);
    ++d;
  }
  return out;
}

}  // namespace flowservo
