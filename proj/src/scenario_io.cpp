#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "flowservo/bench.hpp"
#include "flowservo/error.hpp"

namespace flowservo {

namespace {

using nlohmann::json;

// Maps JSON pointers ("/controller/cem/population") to the 1-based line where the value's key (or
// array element) starts. Only called on text that already parsed.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : text_(text) {
    skip_ws();
    value("");
  }

  int line_of(std::string pointer) const {
    for (;;) {
      if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
      const auto slash = pointer.rfind('/');
      if (slash == std::string::npos || pointer.empty()) return 1;
      pointer.resize(slash);
    }
  }

 private:
  void value(const std::string& ptr) {
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        const int key_line = line_;
        const std::string key = string_token();
        skip_ws();
        ++pos_;  // ':'
        skip_ws();
        const std::string child = ptr + "/" + key;
        lines_.emplace(child, key_line);
        value(child);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          skip_ws();
        }
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      skip_ws();
      int index = 0;
      while (pos_ < text_.size() && text_[pos_] != ']') {
        const std::string child = ptr + "/" + std::to_string(index++);
        lines_.emplace(child, line_);
        value(child);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          skip_ws();
        }
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && std::string_view(",]} \t\r\n").find(text_[pos_]) == std::string_view::npos)
        ++pos_;
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') out += text_[pos_++];
      if (text_[pos_] == '\n') ++line_;
      out += text_[pos_++];
    }
    ++pos_;
    return out;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

std::string dotted_to_pointer(const std::string& dotted) {
  std::string out = "/";
  for (char c : dotted) out += (c == '.') ? '/' : c;
  return out;
}

class ScenarioParser {
 public:
  ScenarioParser(const std::string& text, std::string source) : source_(std::move(source)), lines_(text) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& field, const std::string& why) const {
    throw ConfigError(source_ + ":" + std::to_string(lines_.line_of(pointer)) + ": " + field + ": " + why);
  }

  // Strict object view: every key must be consumed before `finish`.
  class Object {
   public:
    Object(const ScenarioParser& p, const json& j, std::string ptr) : p_(p), j_(j), ptr_(std::move(ptr)) {
      if (!j_.is_object()) p_.fail(ptr_, field(""), "expected an object");
    }

    bool has(const std::string& key) {
      seen_.insert(key);
      return j_.contains(key);
    }

    const json& at(const std::string& key) {
      seen_.insert(key);
      if (!j_.contains(key)) p_.fail(ptr_, field(key), "required field is missing");
      return j_.at(key);
    }

    std::string pointer(const std::string& key) const { return ptr_ + "/" + key; }
    std::string field(const std::string& key) const {
      std::string f = ptr_.empty() ? "" : ptr_.substr(1);
      for (auto& c : f)
        if (c == '/') c = '.';
      if (key.empty()) return f.empty() ? "<root>" : f;
      return f.empty() ? key : f + "." + key;
    }

    double number(const std::string& key, double fallback) {
      if (!has(key)) return fallback;
      return to_number(j_.at(key), key);
    }

    double to_number(const json& v, const std::string& key) const {
      if (!v.is_number()) p_.fail(pointer(key), field(key), "expected a number");
      return v.get<double>();
    }

    int integer(const std::string& key, int fallback) {
      if (!has(key)) return fallback;
      const json& v = j_.at(key);
      if (!v.is_number_integer()) p_.fail(pointer(key), field(key), "expected an integer");
      return v.get<int>();
    }

    bool boolean(const std::string& key, bool fallback) {
      if (!has(key)) return fallback;
      const json& v = j_.at(key);
      if (!v.is_boolean()) p_.fail(pointer(key), field(key), "expected true or false");
      return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
      if (!has(key)) return fallback;
      const json& v = j_.at(key);
      if (!v.is_string()) p_.fail(pointer(key), field(key), "expected a string");
      return v.get<std::string>();
    }

    template <int N>
    Eigen::Matrix<double, N, 1> vec(const json& v, const std::string& key) const {
      if (!v.is_array() || static_cast<int>(v.size()) != N)
        p_.fail(pointer(key), field(key), "expected an array of " + std::to_string(N) + " numbers");
      Eigen::Matrix<double, N, 1> out;
      for (int k = 0; k < N; ++k) {
        if (!v[static_cast<std::size_t>(k)].is_number())
          p_.fail(pointer(key) + "/" + std::to_string(k), field(key), "expected a number");
        out[k] = v[static_cast<std::size_t>(k)].get<double>();
      }
      return out;
    }

    Object child(const std::string& key) { return Object(p_, at(key), pointer(key)); }

    void finish() const {
      for (auto it = j_.begin(); it != j_.end(); ++it)
        if (!seen_.count(it.key())) p_.fail(pointer(it.key()), field(it.key()), "unknown key");
    }

   private:
    const ScenarioParser& p_;
    const json& j_;
    std::string ptr_;
    std::set<std::string> seen_;
  };

  ScenarioConfig parse(const json& root) const {
    ScenarioConfig cfg;
    Object top(*this, root, "");
    cfg.name = top.string("name", cfg.name);
    if (top.has("seed")) {
      const json& s = root.at("seed");
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        fail("/seed", "seed", "expected a non-negative integer");
      cfg.seed = s.get<std::uint64_t>();
    }
    cfg.pipeline.flow_noise_sigma = top.number("flow_noise_sigma", cfg.pipeline.flow_noise_sigma);

    {
      Object start = top.child("start");
      cfg.start.position = start.vec<3>(start.at("position"), "position");
      cfg.start.yaw = wrap_angle(start.number("yaw", 0.0));
      start.finish();
    }
    cfg.goal = top.vec<3>(top.at("goal"), "goal");

    if (top.has("buildings")) {
      const json& list = root.at("buildings");
      if (!list.is_array()) fail("/buildings", "buildings", "expected an array");
      for (std::size_t k = 0; k < list.size(); ++k) {
        Object b(*this, list[k], "/buildings/" + std::to_string(k));
        Building out;
        out.id = b.integer("id", static_cast<int>(k));
        out.min_corner = b.vec<3>(b.at("min"), "min");
        out.max_corner = b.vec<3>(b.at("max"), "max");
        b.finish();
        cfg.scene.buildings.push_back(out);
      }
    }

    if (top.has("scene")) {
      Object s = top.child("scene");
      cfg.scene.detection_range = s.number("detection_range", cfg.scene.detection_range);
      cfg.scene.corridor_half_angle = s.number("corridor_half_angle", cfg.scene.corridor_half_angle);
      s.finish();
    }

    if (top.has("camera")) {
      Object c = top.child("camera");
      CameraModel& cam = cfg.pipeline.camera;
      cam.width = c.integer("width", cam.width);
      cam.height = c.integer("height", cam.height);
      // Principal point defaults to the image center of the (possibly overridden) size.
      cam.cx = cam.width / 2;
      cam.cy = cam.height / 2;
      cam.fx = c.number("fx", cam.fx);
      cam.fy = c.number("fy", cam.fy);
      cam.cx = c.number("cx", cam.cx);
      cam.cy = c.number("cy", cam.cy);
      c.finish();
    }

    if (top.has("controller")) parse_controller(top.child("controller"), cfg.pipeline);

    if (top.has("termination")) {
      Object t = top.child("termination");
      TerminationConfig& term = cfg.termination;
      term.dt = t.number("dt", term.dt);
      term.goal_radius = t.number("goal_radius", term.goal_radius);
      term.collision_radius = t.number("collision_radius", term.collision_radius);
      term.t_max = t.number("t_max", term.t_max);
      t.finish();
    }
    top.finish();

    try {
      cfg.validate();
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      const auto colon = msg.find(':');
      const std::string field = colon == std::string::npos ? std::string("<root>") : msg.substr(0, colon);
      const std::string why = colon == std::string::npos ? msg : msg.substr(colon + 2);
      fail(dotted_to_pointer(field), field, why);
    }
    return cfg;
  }

 private:
  void parse_controller(Object c, PipelineConfig& p) const {
    p.lambda = c.number("lambda", p.lambda);
    p.mask_threshold = c.number("mask_threshold", p.mask_threshold);
    p.center_threshold = c.number("center_threshold", p.center_threshold);
    p.forward_damping = c.number("forward_damping", p.forward_damping);
    p.v_max = c.number("v_max", p.v_max);
    p.loss_stride = c.integer("loss_stride", p.loss_stride);
    if (c.has("loss_region")) {
      try {
        p.loss_region = loss_region_from_string(c.string("loss_region", ""));
      } catch (const DomainError& e) {
        fail(c.pointer("loss_region"), c.field("loss_region"), e.what());
      }
    }
    if (c.has("depth_mode")) {
      try {
        p.depth_mode = depth_mode_from_string(c.string("depth_mode", ""));
      } catch (const DomainError& e) {
        fail(c.pointer("depth_mode"), c.field("depth_mode"), e.what());
      }
    }
    p.flow_depth.scale = c.number("flowdepth_scale", p.flow_depth.scale);
    p.flow_depth.epsilon = c.number("flowdepth_epsilon", p.flow_depth.epsilon);

    if (c.has("goal_gains")) {
      Object g = c.child("goal_gains");
      p.goal.k_yaw = g.number("k_yaw", p.goal.k_yaw);
      p.goal.k_z = g.number("k_z", p.goal.k_z);
      p.goal.yaw_rate_max = g.number("yaw_rate_max", p.goal.yaw_rate_max);
      p.goal.v_up_max = g.number("v_up_max", p.goal.v_up_max);
      g.finish();
    }
    if (c.has("cem")) {
      Object m = c.child("cem");
      CemConfig& cem = p.cem;
      cem.population = m.integer("population", cem.population);
      cem.elites = m.integer("elites", cem.elites);
      cem.iterations = m.integer("iterations", cem.iterations);
      cem.horizon = m.integer("horizon", cem.horizon);
      cem.elite_retention = m.boolean("elite_retention", cem.elite_retention);
      cem.per_step = m.boolean("per_step", cem.per_step);
      auto command = [&m](const std::string& key, VelocityCommand fallback) {
        if (!m.has(key)) return fallback;
        const Eigen::Vector4d v = m.vec<4>(m.at(key), key);
        return VelocityCommand{v[0], v[1], v[2], v[3]};
      };
      cem.init_std = command("init_std", cem.init_std);
      cem.lower = command("lower", cem.lower);
      cem.upper = command("upper", cem.upper);
      m.finish();
    }
    if (c.has("flow_balance")) {
      Object f = c.child("flow_balance");
      p.flow_balance.gain = f.number("gain", p.flow_balance.gain);
      p.flow_balance.yaw_rate_max = f.number("yaw_rate_max", p.flow_balance.yaw_rate_max);
      p.flow_balance.eps_denom = f.number("eps_denom", p.flow_balance.eps_denom);
      f.finish();
    }
    c.finish();
  }

  std::string source_;
  LineIndex lines_;
};

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }
json cmd_json(const VelocityCommand& c) { return json::array({c.v_fwd, c.v_left, c.v_up, c.yaw_rate}); }

}  // namespace

ScenarioConfig parse_scenario(const std::string& text, const std::string& source_name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  return ScenarioParser(text, source_name).parse(root);
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open scenario file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path.string());
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  const PipelineConfig& p = cfg.pipeline;
  json buildings = json::array();
  for (const auto& b : cfg.scene.buildings)
    buildings.push_back({{"id", b.id}, {"min", vec_json(b.min_corner)}, {"max", vec_json(b.max_corner)}});
  json root = {
      {"name", cfg.name},
      {"seed", cfg.seed},
      {"flow_noise_sigma", p.flow_noise_sigma},
      {"start", {{"position", vec_json(cfg.start.position)}, {"yaw", cfg.start.yaw}}},
      {"goal", vec_json(cfg.goal)},
      {"buildings", buildings},
      {"scene",
       {{"detection_range", cfg.scene.detection_range}, {"corridor_half_angle", cfg.scene.corridor_half_angle}}},
      {"camera",
       {{"width", p.camera.width},
        {"height", p.camera.height},
        {"fx", p.camera.fx},
        {"fy", p.camera.fy},
        {"cx", p.camera.cx},
        {"cy", p.camera.cy}}},
      {"controller",
       {{"lambda", p.lambda},
        {"mask_threshold", p.mask_threshold},
        {"center_threshold", p.center_threshold},
        {"forward_damping", p.forward_damping},
        {"v_max", p.v_max},
        {"loss_stride", p.loss_stride},
        {"loss_region", to_string(p.loss_region)},
        {"depth_mode", to_string(p.depth_mode)},
        {"flowdepth_scale", p.flow_depth.scale},
        {"flowdepth_epsilon", p.flow_depth.epsilon},
        {"goal_gains",
         {{"k_yaw", p.goal.k_yaw},
          {"k_z", p.goal.k_z},
          {"yaw_rate_max", p.goal.yaw_rate_max},
          {"v_up_max", p.goal.v_up_max}}},
        {"cem",
         {{"population", p.cem.population},
          {"elites", p.cem.elites},
          {"iterations", p.cem.iterations},
          {"horizon", p.cem.horizon},
          {"elite_retention", p.cem.elite_retention},
          {"per_step", p.cem.per_step},
          {"init_std", cmd_json(p.cem.init_std)},
          {"lower", cmd_json(p.cem.lower)},
          {"upper", cmd_json(p.cem.upper)}}},
        {"flow_balance",
         {{"gain", p.flow_balance.gain},
          {"yaw_rate_max", p.flow_balance.yaw_rate_max},
          {"eps_denom", p.flow_balance.eps_denom}}}}},
      {"termination",
       {{"dt", cfg.termination.dt},
        {"goal_radius", cfg.termination.goal_radius},
        {"collision_radius", cfg.termination.collision_radius},
        {"t_max", cfg.termination.t_max}}},
  };
  return root.dump(2) + "\n";
}

}  // namespace flowservo
