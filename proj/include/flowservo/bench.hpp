#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowservo/pipeline.hpp"

namespace flowservo {

// ---------------------------------------------------------------------------
// Scenario files (JSON). Absent fields take the defaults of ScenarioConfig;
// unknown keys are rejected. Errors carry "<file>:<line>: <field>: <reason>".
// ---------------------------------------------------------------------------

ScenarioConfig parse_scenario(const std::string& text, const std::string& source_name = "<string>");
ScenarioConfig load_scenario(const std::filesystem::path& path);
/// Complete JSON document (every field written) that parse_scenario reads back to an equal config.
std::string serialize_scenario(const ScenarioConfig& config);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct TrajectoryMetrics {
  double min_dist = 0.0;
  double traj_length = 0.0;
};

/// min over samples and buildings of the point-to-box distance, and the summed step length.
TrajectoryMetrics compute_metrics(std::span<const Eigen::Vector3d> positions, const Scene& scene);
std::vector<Eigen::Vector3d> trajectory_positions(const EpisodeResult& result);

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

inline constexpr const char* kTrajectoryCsvHeader =
    "t,x,y,z,yaw,v_fwd,v_left,v_up,yaw_rate,mode,mask_coverage,center_coverage,loss,min_dist_step";

void write_trajectory_csv(const EpisodeResult& result, const std::filesystem::path& path);

struct CsvRow {
  double t, x, y, z, yaw, v_fwd, v_left, v_up, yaw_rate;
  std::string mode;
  double mask_coverage, center_coverage, loss, min_dist_step;
};
std::vector<CsvRow> read_trajectory_csv(const std::filesystem::path& path);

/// Middlebury .flo: float 202021.25, int32 width, int32 height, then (col, row) float32 pairs in
/// row-major order, all little-endian.
inline constexpr float kFloMagic = 202021.25f;
void write_flo(const FlowField& flow, const std::filesystem::path& path);
FlowField read_flo(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

struct SuiteOptions {
  std::optional<std::uint64_t> seed;       // overrides each scenario's seed
  std::optional<double> noise_sigma;       // overrides each scenario's flow noise
  std::optional<DepthMode> depth_mode;     // overrides each scenario's depth mode
  bool dump_flow = false;
  bool write_files = true;
};

struct EpisodeRecord {
  std::string scenario;
  ControllerKind controller = ControllerKind::kOurs;
  std::optional<EpisodeResult> result;  // empty when the episode raised
  std::string error;

  bool success() const { return result && result->outcome == Outcome::kSuccess; }
};

struct ControllerTally {
  ControllerKind controller = ControllerKind::kOurs;
  int successes = 0;
  int episodes = 0;
  double success_rate() const { return episodes == 0 ? 0.0 : static_cast<double>(successes) / episodes; }
};

struct SuiteSummary {
  std::vector<EpisodeRecord> episodes;  // scenario-major, controller-minor
  std::vector<ControllerTally> tallies;

  const EpisodeRecord* find(const std::string& scenario, ControllerKind controller) const;
  const ControllerTally& tally(ControllerKind controller) const;
};

/// Lists *.json files of a directory in lexicographic order.
std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir);

SuiteSummary run_suite(std::span<const ScenarioConfig> scenarios, std::span<const ControllerKind> controllers,
                       const std::filesystem::path& out_dir, const SuiteOptions& options = {});
SuiteSummary run_suite(std::span<const std::filesystem::path> scenario_paths,
                       std::span<const ControllerKind> controllers, const std::filesystem::path& out_dir,
                       const SuiteOptions& options = {});

std::string format_summary_table(const SuiteSummary& summary);
std::string summary_json(const SuiteSummary& summary);

}  // namespace flowservo
