#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flowservo/bench.hpp"
#include "flowservo/error.hpp"

namespace flowservo {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

const EpisodeRecord* SuiteSummary::find(const std::string& scenario, ControllerKind controller) const {
  for (const auto& e : episodes)
    if (e.scenario == scenario && e.controller == controller) return &e;
  return nullptr;
}

const ControllerTally& SuiteSummary::tally(ControllerKind controller) const {
  for (const auto& t : tallies)
    if (t.controller == controller) return t;
  throw DomainError(std::string("no tally for controller ") + to_string(controller));
}

std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

SuiteSummary run_suite(std::span<const ScenarioConfig> scenarios, std::span<const ControllerKind> controllers,
                       const std::filesystem::path& out_dir, const SuiteOptions& options) {
  if (scenarios.empty()) throw ConfigError("run_suite: no scenarios");
  if (controllers.empty()) throw ConfigError("run_suite: no controllers");
  if (options.write_files) std::filesystem::create_directories(out_dir);

  SuiteSummary summary;
  for (auto c : controllers) summary.tallies.push_back({c, 0, 0});

  for (const ScenarioConfig& base : scenarios) {
    ScenarioConfig sc = base;
    if (options.seed) sc.seed = *options.seed;
    if (options.noise_sigma) sc.pipeline.flow_noise_sigma = *options.noise_sigma;
    if (options.depth_mode) sc.pipeline.depth_mode = *options.depth_mode;

    for (std::size_t ci = 0; ci < controllers.size(); ++ci) {
      const ControllerKind controller = controllers[ci];
      EpisodeRecord rec;
      rec.scenario = sc.name;
      rec.controller = controller;
      const std::string stem = sc.name + "__" + to_string(controller);

      FlowObserver observer;
      std::filesystem::path flow_dir = out_dir / "flows" / stem;
      if (options.dump_flow && options.write_files && controller == ControllerKind::kOurs) {
        std::filesystem::create_directories(flow_dir);
        observer = [&flow_dir](int step, const StepFlows& flows) {
          char name[64];
          std::snprintf(name, sizeof name, "step_%06d", step);
          write_flo(flows.desired, flow_dir / (std::string(name) + "_desired.flo"));
          write_flo(flows.predicted, flow_dir / (std::string(name) + "_predicted.flo"));
        };
      }

      try {
        rec.result = run_episode(sc, controller, sc.seed, observer);
        if (options.write_files) write_trajectory_csv(*rec.result, out_dir / (stem + ".csv"));
      } catch (const IoError&) {
        throw;
      } catch (const std::exception& e) {
        rec.result.reset();
        rec.error = e.what();
      }
      ++summary.tallies[ci].episodes;
      if (rec.success()) ++summary.tallies[ci].successes;
      summary.episodes.push_back(std::move(rec));
    }
  }

  if (options.write_files) {
    write_text(out_dir / "summary.txt", format_summary_table(summary));
    write_text(out_dir / "summary.json", summary_json(summary));
  }
  return summary;
}

SuiteSummary run_suite(std::span<const std::filesystem::path> scenario_paths,
                       std::span<const ControllerKind> controllers, const std::filesystem::path& out_dir,
                       const SuiteOptions& options) {
  std::vector<ScenarioConfig> configs;
  for (const auto& p : scenario_paths) configs.push_back(load_scenario(p));
  return run_suite(configs, controllers, out_dir, options);
}

std::string format_summary_table(const SuiteSummary& summary) {
  std::size_t name_w = 8;
  for (const auto& e : summary.episodes) name_w = std::max(name_w, e.scenario.size());
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-10s  %-9s  %10s  %12s  %6s\n", static_cast<int>(name_w), "scenario",
                "controller", "outcome", "min_dist_m", "traj_len_m", "steps");
  os << line;
  for (const auto& e : summary.episodes) {
    if (e.result) {
      std::snprintf(line, sizeof line, "%-*s  %-10s  %-9s  %10.3f  %12.3f  %6zu\n", static_cast<int>(name_w),
                    e.scenario.c_str(), to_string(e.controller), to_string(e.result->outcome), e.result->min_dist,
                    e.result->traj_length, e.result->trajectory.size());
    } else {
      std::snprintf(line, sizeof line, "%-*s  %-10s  %-9s  %10s  %12s  %6s\n", static_cast<int>(name_w),
                    e.scenario.c_str(), to_string(e.controller), "Error", "-", "-", "-");
    }
    os << line;
  }
  os << "\n";
  std::snprintf(line, sizeof line, "%-10s  %9s  %12s\n", "controller", "successes", "success_rate");
  os << line;
  for (const auto& t : summary.tallies) {
    const std::string count = std::to_string(t.successes) + "/" + std::to_string(t.episodes);
    std::snprintf(line, sizeof line, "%-10s  %9s  %12s\n", to_string(t.controller), count.c_str(),
                  fmt("%.4f", t.success_rate()).c_str());
    os << line;
  }
  return os.str();
}

std::string summary_json(const SuiteSummary& summary) {
  using nlohmann::json;
  json episodes = json::array();
  for (const auto& e : summary.episodes) {
    json row = {{"scenario", e.scenario}, {"controller", to_string(e.controller)}};
    if (e.result) {
      row["outcome"] = to_string(e.result->outcome);
      row["min_dist"] = e.result->min_dist;
      row["traj_length"] = e.result->traj_length;
      row["steps"] = e.result->trajectory.size();
      row["cem_failures"] = e.result->cem_failures;
    } else {
      row["outcome"] = "Error";
      row["error"] = e.error;
    }
    episodes.push_back(row);
  }
  json tallies = json::array();
  for (const auto& t : summary.tallies)
    tallies.push_back({{"controller", to_string(t.controller)},
                       {"successes", t.successes},
                       {"episodes", t.episodes},
                       {"success_rate", t.success_rate()}});
  return json{{"episodes", episodes}, {"controllers", tallies}}.dump(2) + "\n";
}

}  // namespace flowservo
