// flowservo: run benchmark scenarios through the closed-loop controllers.
//
//   flowservo run --suite scenarios --controller ours --controller naive-fb --out results
//   flowservo run --scenario scenarios/01_head_on.json --controller all --noise 0.5 --out results

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowservo/bench.hpp"
#include "flowservo/error.hpp"

namespace fs = std::filesystem;
using namespace flowservo;

int main(int argc, char** argv) {
  CLI::App app{"Flow-synthesis visual servoing benchmark"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Fly scenarios and write trajectories and a summary");
  std::string scenario_path;
  std::string suite_dir;
  std::vector<std::string> controller_names;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
  std::string out_dir = "flowservo_out";
  bool dump_flow = false;
  std::string depth_mode;

  auto* scenario_opt = run->add_option("--scenario", scenario_path, "Scenario JSON file");
  auto* suite_opt = run->add_option("--suite", suite_dir, "Directory of scenario JSON files");
  scenario_opt->excludes(suite_opt);
  run->add_option("--controller", controller_names, "ours | naive-fb | radial-fb | all (repeatable)")
      ->check(CLI::IsMember({"ours", "naive-fb", "radial-fb", "all"}));
  run->add_option("--seed", seed, "Seed overriding every scenario's seed");
  run->add_option("--noise", noise, "Flow noise sigma in pixels, overriding the scenarios")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_flag("--dump-flow", dump_flow, "Write desired/predicted .flo files for every avoidance step");
  run->add_option("--depth-mode", depth_mode, "flowdepth | true")->check(CLI::IsMember({"flowdepth", "true"}));

  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<fs::path> paths;
    if (!scenario_path.empty())
      paths.push_back(scenario_path);
    else if (!suite_dir.empty())
      paths = scenario_files(suite_dir);
    else
      throw ConfigError("one of --scenario or --suite is required");
    if (paths.empty()) throw ConfigError("no scenario files found in " + suite_dir);

    std::vector<ControllerKind> controllers;
    if (controller_names.empty()) controller_names.push_back("all");
    for (const auto& name : controller_names) {
      if (name == "all") {
        controllers = {ControllerKind::kOurs, ControllerKind::kRadialFlowBalance, ControllerKind::kNaiveFlowBalance};
        break;
      }
      controllers.push_back(controller_from_string(name));
    }

    SuiteOptions options;
    options.seed = seed;
    options.noise_sigma = noise;
    if (!depth_mode.empty()) options.depth_mode = depth_mode_from_string(depth_mode);
    options.dump_flow = dump_flow;

    const SuiteSummary summary = run_suite(paths, controllers, out_dir, options);
    std::cout << format_summary_table(summary);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "flowservo: " << e.what() << '\n';
    return 2;
  }
}
