#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "flowservo/baselines.hpp"
#include "flowservo/bench.hpp"
#include "flowservo/error.hpp"
#include "flowservo/flow_synthesis.hpp"
#include "flowservo/geometry.hpp"
#include "flowservo/pipeline.hpp"
#include "flowservo/scene.hpp"
#include "flowservo/servo.hpp"

namespace py = pybind11;
using namespace flowservo;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// Flow fields cross the boundary as (H, W, 2) float64 arrays in (row, col) order.
py::array_t<double> flow_to_numpy(const FlowField& f) {
  py::array_t<double> out({f.rows(), f.cols(), 2});
  static_assert(sizeof(FlowVector) == 2 * sizeof(double));
  std::memcpy(out.mutable_data(), f.data(), f.size() * sizeof(FlowVector));
  return out;
}

FlowField flow_from_numpy(const F64Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 2) throw DomainError("flow array must have shape (H, W, 2)");
  FlowField f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(f.data(), a.data(), f.size() * sizeof(FlowVector));
  return f;
}

template <typename T>
py::array_t<T> grid_to_numpy(const Grid<T>& g) {
  py::array_t<T> out({g.rows(), g.cols()});
  std::memcpy(out.mutable_data(), g.data(), g.size() * sizeof(T));
  return out;
}

template <typename T>
Grid<T> grid_from_numpy(const py::array_t<T, py::array::c_style | py::array::forcecast>& a, const char* what) {
  if (a.ndim() != 2) throw DomainError(std::string(what) + " must be two-dimensional");
  Grid<T> g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(g.data(), a.data(), g.size() * sizeof(T));
  return g;
}

DepthProxyMap proxy_from_numpy(const F64Array& depth, const std::optional<U8Array>& valid) {
  DepthProxyMap p;
  p.depth = grid_from_numpy<double>(depth, "depth");
  if (valid) {
    p.valid = grid_from_numpy<std::uint8_t>(*valid, "valid");
    require_same_shape(p.depth, p.valid, "depth/valid");
  } else {
    p.valid = ValidityGrid(p.depth.rows(), p.depth.cols(), 0);
    for (std::size_t k = 0; k < p.depth.size(); ++k) {
      const double z = p.depth.data()[k];
      p.valid.data()[k] = std::isfinite(z) && z > 0.0;
    }
  }
  return p;
}

// Trajectory as column arrays, one entry per logged step.
py::dict trajectory_columns(const EpisodeResult& r) {
  const std::size_t n = r.trajectory.size();
  py::array_t<double> t(n), pos({n, std::size_t{3}}), yaw(n), cmd({n, std::size_t{4}}), mask_cov(n), center_cov(n),
      loss(n), min_dist(n);
  py::list mode;
  for (std::size_t k = 0; k < n; ++k) {
    const StepLog& s = r.trajectory[k];
    t.mutable_at(k) = s.t;
    for (int d = 0; d < 3; ++d) pos.mutable_at(k, d) = s.pose.position[d];
    yaw.mutable_at(k) = s.pose.yaw;
    for (int d = 0; d < 4; ++d) cmd.mutable_at(k, d) = s.command[d];
    mask_cov.mutable_at(k) = s.mask_coverage;
    center_cov.mutable_at(k) = s.center_coverage;
    loss.mutable_at(k) = s.loss;
    min_dist.mutable_at(k) = s.min_dist;
    mode.append(to_string(s.mode));
  }
  py::dict d;
  d["t"] = t;
  d["position"] = pos;
  d["yaw"] = yaw;
  d["command"] = cmd;
  d["mode"] = mode;
  d["mask_coverage"] = mask_cov;
  d["center_coverage"] = center_cov;
  d["loss"] = loss;
  d["min_dist"] = min_dist;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Flow-synthesis visual servoing in a box-world simulator";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<OptimizationError>(m, "OptimizationError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<CameraModel>(m, "CameraModel")
      .def(py::init<>())
      .def(py::init([](int width, int height, double fx, double fy, double cx, double cy) {
             CameraModel c{width, height, fx, fy, cx, cy};
             c.validate();
             return c;
           }),
           py::arg("width"), py::arg("height"), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"))
      .def_readwrite("width", &CameraModel::width)
      .def_readwrite("height", &CameraModel::height)
      .def_readwrite("fx", &CameraModel::fx)
      .def_readwrite("fy", &CameraModel::fy)
      .def_readwrite("cx", &CameraModel::cx)
      .def_readwrite("cy", &CameraModel::cy)
      .def("validate", &CameraModel::validate)
      .def(py::self == py::self);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Vector3d& p, double yaw) { return Pose{p, yaw}; }), py::arg("position"),
           py::arg("yaw") = 0.0)
      .def_readwrite("position", &Pose::position)
      .def_readwrite("yaw", &Pose::yaw)
      .def("__repr__", [](const Pose& p) {
        return "Pose(position=[" + std::to_string(p.position.x()) + ", " + std::to_string(p.position.y()) + ", " +
               std::to_string(p.position.z()) + "], yaw=" + std::to_string(p.yaw) + ")";
      });

  py::class_<VelocityCommand>(m, "VelocityCommand")
      .def(py::init<>())
      .def(py::init([](double f, double l, double u, double y) { return VelocityCommand{f, l, u, y}; }),
           py::arg("v_fwd") = 0.0, py::arg("v_left") = 0.0, py::arg("v_up") = 0.0, py::arg("yaw_rate") = 0.0)
      .def_readwrite("v_fwd", &VelocityCommand::v_fwd)
      .def_readwrite("v_left", &VelocityCommand::v_left)
      .def_readwrite("v_up", &VelocityCommand::v_up)
      .def_readwrite("yaw_rate", &VelocityCommand::yaw_rate)
      .def("as_array", &VelocityCommand::as_array)
      .def(py::self == py::self)
      .def("__repr__", [](const VelocityCommand& c) {
        return "VelocityCommand(" + std::to_string(c.v_fwd) + ", " + std::to_string(c.v_left) + ", " +
               std::to_string(c.v_up) + ", " + std::to_string(c.yaw_rate) + ")";
      });

  m.def("integrate_pose", &integrate_pose, py::arg("pose"), py::arg("command"), py::arg("dt"));
  m.def("wrap_angle", &wrap_angle);

  py::class_<Building>(m, "Building")
      .def(py::init([](int id, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) { return Building{id, lo, hi}; }),
           py::arg("id"), py::arg("min_corner"), py::arg("max_corner"))
      .def_readwrite("id", &Building::id)
      .def_readwrite("min_corner", &Building::min_corner)
      .def_readwrite("max_corner", &Building::max_corner)
      .def("distance_to", &Building::distance_to);

  py::class_<Scene>(m, "Scene")
      .def(py::init<>())
      .def(py::init([](std::vector<Building> b) {
             Scene s;
             s.buildings = std::move(b);
             s.validate();
             return s;
           }),
           py::arg("buildings"))
      .def_readwrite("buildings", &Scene::buildings)
      .def_readwrite("detection_range", &Scene::detection_range)
      .def_readwrite("corridor_half_angle", &Scene::corridor_half_angle)
      .def("validate", &Scene::validate)
      .def("distance_to_nearest", &Scene::distance_to_nearest);

  m.def(
      "render",
      [](const Scene& s, const Pose& p, const CameraModel& cam) {
        const RenderResult r = render_depth_and_ids(s, p, cam);
        return py::make_tuple(grid_to_numpy(r.depth), grid_to_numpy(r.ids));
      },
      py::arg("scene"), py::arg("pose"), py::arg("camera") = CameraModel{},
      "Returns (depth, ids): z-depth (+inf on a miss) and building ids (-1 on a miss).");
  m.def(
      "select_building_of_concern",
      [](const Scene& s, const Pose& p) { return select_building_of_concern(s, p, heading_vector(p)); },
      py::arg("scene"), py::arg("pose"));
  m.def(
      "analytic_flow",
      [](const Pose& p0, const Pose& p1, const F64Array& depth, const CameraModel& cam) {
        const FlowResult r = analytic_flow(p0, p1, grid_from_numpy<double>(depth, "depth"), cam);
        return py::make_tuple(flow_to_numpy(r.flow), grid_to_numpy(r.valid));
      },
      py::arg("pose_prev"), py::arg("pose_curr"), py::arg("depth_prev"), py::arg("camera") = CameraModel{});

  m.def(
      "radial_flow_field",
      [](int height, int width, double lambda) { return flow_to_numpy(radial_flow_field({lambda, height, width})); },
      py::arg("height"), py::arg("width"), py::arg("lam") = 10.0);
  m.def(
      "desired_flow",
      [](const F64Array& radial, const U8Array& mask) {
        return flow_to_numpy(desired_flow(flow_from_numpy(radial), grid_from_numpy<std::uint8_t>(mask, "mask")));
      },
      py::arg("radial"), py::arg("mask"));

  m.def("interaction_matrix", &interaction_matrix_at, py::arg("x"), py::arg("y"), py::arg("depth"));
  m.def(
      "predict_flow",
      [](const F64Array& depth, const std::vector<VelocityCommand>& commands, const CameraModel& cam, double dt,
         const std::optional<U8Array>& valid) {
        const DepthProxyMap p = proxy_from_numpy(depth, valid);
        return flow_to_numpy(predict_flow(p, cam, commands, static_cast<int>(commands.size()), dt));
      },
      py::arg("depth"), py::arg("commands"), py::arg("camera") = CameraModel{}, py::arg("dt") = 0.1,
      py::arg("valid") = py::none());
  m.def(
      "flow_loss",
      [](const F64Array& predicted, const F64Array& desired, const U8Array& valid, int stride) {
        return flow_loss(flow_from_numpy(predicted), flow_from_numpy(desired),
                         grid_from_numpy<std::uint8_t>(valid, "valid"), stride)
            .loss;
      },
      py::arg("predicted"), py::arg("desired"), py::arg("valid"), py::arg("stride") = 1);

  py::class_<CemConfig>(m, "CemConfig")
      .def(py::init<>())
      .def_readwrite("population", &CemConfig::population)
      .def_readwrite("elites", &CemConfig::elites)
      .def_readwrite("iterations", &CemConfig::iterations)
      .def_readwrite("horizon", &CemConfig::horizon)
      .def_readwrite("dt", &CemConfig::dt)
      .def_readwrite("init_mean", &CemConfig::init_mean)
      .def_readwrite("init_std", &CemConfig::init_std)
      .def_readwrite("lower", &CemConfig::lower)
      .def_readwrite("upper", &CemConfig::upper)
      .def_readwrite("seed", &CemConfig::seed)
      .def_readwrite("elite_retention", &CemConfig::elite_retention)
      .def_readwrite("per_step", &CemConfig::per_step)
      .def("validate", &CemConfig::validate);

  py::class_<CemResult>(m, "CemResult")
      .def_readonly("best_sequence", &CemResult::best_sequence)
      .def_readonly("best_loss", &CemResult::best_loss)
      .def_readonly("trace", &CemResult::trace)
      .def_readonly("final_mean", &CemResult::final_mean);

  m.def(
      "cem_optimize",
      [](const std::function<double(std::vector<VelocityCommand>)>& fn, const CemConfig& cfg) {
        return cem_optimize([&](std::span<const VelocityCommand> s) { return fn({s.begin(), s.end()}); }, cfg);
      },
      py::arg("loss"), py::arg("config"), "Minimises loss(list[VelocityCommand]) -> float.");

  m.def(
      "servo_command",
      [](const F64Array& depth, const U8Array& mask, const CemConfig& cfg, const CameraModel& cam, double lambda,
         int stride, bool mask_only) {
        const DepthProxyMap p = proxy_from_numpy(depth, std::nullopt);
        const ObstacleMask msk = grid_from_numpy<std::uint8_t>(mask, "mask");
        const FlowField desired = desired_flow(radial_flow_field({lambda, cam.height, cam.width}), msk);
        const FlowServoObjective obj(p, desired, cam, cfg.dt, stride, mask_only ? &msk : nullptr);
        return cem_optimize([&](std::span<const VelocityCommand> s) { return obj(s); }, cfg);
      },
      py::arg("depth"), py::arg("mask"), py::arg("config") = CemConfig{.horizon = 3},
      py::arg("camera") = CameraModel{}, py::arg("lam") = 10.0, py::arg("stride") = 4, py::arg("mask_only") = true,
      "One flow-servo solve: the command whose predicted flow best matches the radial flow on the mask.");

  py::class_<FlowBalanceConfig>(m, "FlowBalanceConfig")
      .def(py::init<>())
      .def_readwrite("gain", &FlowBalanceConfig::gain)
      .def_readwrite("forward_speed", &FlowBalanceConfig::forward_speed)
      .def_readwrite("yaw_rate_max", &FlowBalanceConfig::yaw_rate_max)
      .def_readwrite("eps_denom", &FlowBalanceConfig::eps_denom);
  m.def(
      "flow_balance_yaw_rate",
      [](const F64Array& flow, const U8Array& valid, const FlowBalanceConfig& cfg) {
        return flow_balance_yaw_rate(flow_from_numpy(flow), grid_from_numpy<std::uint8_t>(valid, "valid"), cfg);
      },
      py::arg("flow"), py::arg("valid"), py::arg("config") = FlowBalanceConfig{});

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_readwrite("name", &ScenarioConfig::name)
      .def_readwrite("scene", &ScenarioConfig::scene)
      .def_readwrite("start", &ScenarioConfig::start)
      .def_readwrite("goal", &ScenarioConfig::goal)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_property(
          "flow_noise_sigma", [](const ScenarioConfig& s) { return s.pipeline.flow_noise_sigma; },
          [](ScenarioConfig& s, double v) { s.pipeline.flow_noise_sigma = v; })
      .def_property(
          "camera", [](const ScenarioConfig& s) { return s.pipeline.camera; },
          [](ScenarioConfig& s, const CameraModel& c) { s.pipeline.camera = c; })
      .def("validate", &ScenarioConfig::validate, py::arg("check_start_clearance") = true)
      .def("to_json", [](const ScenarioConfig& s) { return serialize_scenario(s); })
      .def(py::self == py::self);

  m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("source_name") = "<string>");
  m.def("load_scenario", &load_scenario, py::arg("path"));
  m.def("scenario_files", &scenario_files, py::arg("directory"));

  py::class_<EpisodeResult>(m, "EpisodeResult")
      .def_property_readonly("outcome", [](const EpisodeResult& r) { return std::string(to_string(r.outcome)); })
      .def_readonly("min_dist", &EpisodeResult::min_dist)
      .def_readonly("traj_length", &EpisodeResult::traj_length)
      .def_readonly("cem_failures", &EpisodeResult::cem_failures)
      .def_property_readonly("steps", [](const EpisodeResult& r) { return r.trajectory.size(); })
      .def("trajectory", &trajectory_columns, "Logged steps as a dict of column arrays.");

  m.def(
      "run_episode",
      [](const ScenarioConfig& sc, const std::string& controller, std::optional<std::uint64_t> seed) {
        py::gil_scoped_release release;
        return run_episode(sc, controller_from_string(controller), seed.value_or(sc.seed));
      },
      py::arg("scenario"), py::arg("controller") = "ours", py::arg("seed") = py::none(),
      "controller is one of 'ours', 'naive-fb', 'radial-fb'.");

  m.def(
      "run_suite",
      [](const std::vector<std::filesystem::path>& paths, const std::vector<std::string>& controllers,
         const std::filesystem::path& out_dir, std::optional<double> noise, std::optional<std::uint64_t> seed,
         bool write_files) {
        std::vector<ControllerKind> kinds;
        for (const auto& c : controllers) kinds.push_back(controller_from_string(c));
        SuiteOptions opt;
        opt.noise_sigma = noise;
        opt.seed = seed;
        opt.write_files = write_files;
        SuiteSummary s;
        {
          py::gil_scoped_release release;
          s = run_suite(paths, kinds, out_dir, opt);
        }
        py::list episodes;
        for (const auto& e : s.episodes) {
          py::dict d;
          d["scenario"] = e.scenario;
          d["controller"] = to_string(e.controller);
          d["outcome"] = e.result ? py::cast(to_string(e.result->outcome)) : py::none();
          d["min_dist"] = e.result ? py::cast(e.result->min_dist) : py::none();
          d["traj_length"] = e.result ? py::cast(e.result->traj_length) : py::none();
          d["error"] = e.error;
          episodes.append(d);
        }
        py::dict successes;
        for (const auto& t : s.tallies) successes[to_string(t.controller)] = t.successes;
        py::dict out;
        out["episodes"] = episodes;
        out["successes"] = successes;
        return out;
      },
      py::arg("scenario_paths"), py::arg("controllers") = std::vector<std::string>{"ours", "radial-fb", "naive-fb"},
      py::arg("out_dir") = std::filesystem::path("flowservo_out"), py::arg("noise") = py::none(),
      py::arg("seed") = py::none(), py::arg("write_files") = true);

  m.def(
      "write_flo", [](const F64Array& flow, const std::filesystem::path& p) { write_flo(flow_from_numpy(flow), p); },
      py::arg("flow"), py::arg("path"));
  m.def(
      "read_flo", [](const std::filesystem::path& p) { return flow_to_numpy(read_flo(p)); }, py::arg("path"));
}
