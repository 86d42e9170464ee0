#include "bandplan/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace bandplan {

using json = nlohmann::ordered_json;

DeformConfig ObjectSpec::build() const {
  DeformConfig d;
  if (type == Topology::Rope) {
    d = make_rope(nodes, length, start, direction);
    if (!grasped[0].empty() || !grasped[1].empty()) {
      d.grasped = grasped;
      d.validate();
    }
  } else {
    auto g = grasped;
    if (g[0].empty() && g[1].empty()) {
      g = {std::vector<std::size_t>{0}, std::vector<std::size_t>{static_cast<std::size_t>(cols - 1)}};
    }
    d = make_cloth(rows, cols, width, height, origin, u, v, g);
  }
  return d;
}

void Scenario::validate() const {
  scene.validate();
  const std::size_t n_points =
      object.type == Topology::Rope ? static_cast<std::size_t>(std::max(object.nodes, 0))
                                    : static_cast<std::size_t>(std::max(object.rows, 0) * std::max(object.cols, 0));
  if (object.type == Topology::Rope) {
    if (object.nodes < 2) throw ConfigError("object.nodes: a rope needs at least 2 nodes");
    if (!(object.length > 0.0)) throw ConfigError("object.length: must be positive");
  } else {
    if (object.rows < 2) throw ConfigError("object.rows: must be >= 2");
    if (object.cols < 2) throw ConfigError("object.cols: must be >= 2");
    if (!(object.width > 0.0)) throw ConfigError("object.width: must be positive");
    if (!(object.height > 0.0)) throw ConfigError("object.height: must be positive");
  }
  for (int g = 0; g < 2; ++g) {
    for (std::size_t k = 0; k < object.grasped[g].size(); ++k) {
      if (object.grasped[g][k] >= n_points) {
        throw ConfigError("object.grasped[" + std::to_string(g) + "][" + std::to_string(k) + "]: index out of range");
      }
    }
  }
  if (!(object.initial_jitter >= 0.0)) throw ConfigError("object.initial_jitter: must be >= 0");
  try {
    object.build();
  } catch (const ModelError& e) {
    throw ConfigError(std::string("object: ") + e.what());
  }

  if (task.targets.empty()) throw ConfigError("task.targets: must not be empty");
  for (std::size_t i = 0; i < task.targets.size(); ++i) {
    if (!scene.bounds.contains(task.targets[i])) {
      throw ConfigError("task.targets[" + std::to_string(i) + "]: outside the workspace bounds");
    }
  }
  if (task.mode == CorrespondenceMode::Fixed) {
    if (task.fixed_points.size() != task.targets.size()) {
      throw ConfigError("task.fixed_points: needs one object point per target");
    }
    for (std::size_t i = 0; i < task.fixed_points.size(); ++i) {
      if (task.fixed_points[i] >= n_points) {
        throw ConfigError("task.fixed_points[" + std::to_string(i) + "]: index out of range");
      }
    }
  }
  if (!(task.cover_threshold >= 0.0)) throw ConfigError("task.cover_threshold: must be >= 0");
  if (!(task.omega_fraction > 0.0 && task.omega_fraction <= 1.0)) {
    throw ConfigError("task.omega_fraction: must be in (0, 1]");
  }
  if (!(task.lambda_s > 0.0)) throw ConfigError("task.lambda_s: must be positive");
  controller.validate();
  deadlock.validate();
  planner.validate();
  simulator.validate();
  if (framework.max_steps < 1) throw ConfigError("framework.max_steps: must be >= 1");
  if (trials.count < 1) throw ConfigError("trials.count: must be >= 1");
  for (const auto& [name, box] : regions) {
    if (!((box.max - box.min).array() >= 0.0).all()) throw ConfigError("regions." + name + ": min must be <= max");
  }
}

namespace {

// ---------------------------------------------------------------- reading

class Reader {
 public:
  Reader(const json& j, std::string path, std::initializer_list<const char*> keys) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + ": expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const {
    if (!j_.contains(key)) throw ConfigError(field(key) + ": required");
    return j_.at(key);
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  double num(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    return number(j_.at(key), field(key));
  }
  double num(const char* key) const { return number(at(key), field(key)); }
  int integer(const char* key, int fallback) const {
    if (!has(key)) return fallback;
    return as_int(j_.at(key), field(key));
  }
  Vec3 vec3(const char* key, const Vec3& fallback) const {
    if (!has(key)) return fallback;
    return as_vec3(j_.at(key), field(key));
  }
  Vec3 vec3(const char* key) const { return as_vec3(at(key), field(key)); }
  std::string str(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    return v.get<std::string>();
  }

  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path + ": must be finite");
    return d;
  }
  static int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return v.get<int>();
  }
  static std::size_t as_index(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(path + ": expected a non-negative integer");
    return static_cast<std::size_t>(v.get<long long>());
  }
  static Vec3 as_vec3(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(path + ": expected [x, y, z]");
    return {number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]")};
  }

 private:
  const json& j_;
  std::string path_;
};

Aabb read_box(const json& j, const std::string& path) {
  Reader r(j, path, {"min", "max"});
  return {r.vec3("min"), r.vec3("max")};
}

Scene read_scene(const json& j) {
  Reader r(j, "scene", {"bounds", "resolution", "obstacles"});
  Scene s;
  s.bounds = read_box(r.at("bounds"), "scene.bounds");
  s.resolution = r.num("resolution");
  if (!(s.resolution > 0.0)) throw ConfigError("scene.resolution: must be positive");
  if (r.has("obstacles")) {
    const json& obs = r.at("obstacles");
    if (!obs.is_array()) throw ConfigError("scene.obstacles: expected an array");
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const std::string path = "scene.obstacles[" + std::to_string(i) + "]";
      if (!obs[i].is_object() || !obs[i].contains("type")) throw ConfigError(path + ".type: required");
      const std::string type = obs[i].at("type").is_string() ? obs[i].at("type").get<std::string>() : "";
      if (type == "box") {
        Reader o(obs[i], path, {"type", "center", "half_extents"});
        s.obstacles.emplace_back(Box{o.vec3("center"), o.vec3("half_extents")});
      } else if (type == "cylinder") {
        Reader o(obs[i], path, {"type", "center", "radius", "half_height"});
        s.obstacles.emplace_back(Cylinder{o.vec3("center"), o.num("radius"), o.num("half_height")});
      } else {
        throw ConfigError(path + ".type: expected \"box\" or \"cylinder\"");
      }
    }
  }
  return s;
}

std::vector<std::size_t> read_indices(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of indices");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(Reader::as_index(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

ObjectSpec read_object(const json& j) {
  const std::string type = j.is_object() && j.contains("type") && j.at("type").is_string()
                               ? j.at("type").get<std::string>()
                               : "";
  ObjectSpec o;
  if (type == "rope") {
    Reader r(j, "object", {"type", "nodes", "length", "start", "direction", "grasped", "initial_jitter"});
    o.type = Topology::Rope;
    o.nodes = r.integer("nodes", o.nodes);
    o.length = r.num("length", o.length);
    o.start = r.vec3("start", o.start);
    o.direction = r.vec3("direction", o.direction);
    o.initial_jitter = r.num("initial_jitter", 0.0);
    if (r.has("grasped")) {
      const json& g = r.at("grasped");
      if (!g.is_array() || g.size() != 2) throw ConfigError("object.grasped: expected two index lists");
      o.grasped = {read_indices(g[0], "object.grasped[0]"), read_indices(g[1], "object.grasped[1]")};
    }
  } else if (type == "cloth") {
    Reader r(j, "object",
             {"type", "rows", "cols", "width", "height", "origin", "u", "v", "grasped", "initial_jitter"});
    o.type = Topology::Cloth;
    o.rows = r.integer("rows", o.rows);
    o.cols = r.integer("cols", o.cols);
    o.width = r.num("width", o.width);
    o.height = r.num("height", o.height);
    o.origin = r.vec3("origin", o.origin);
    o.u = r.vec3("u", o.u);
    o.v = r.vec3("v", o.v);
    o.initial_jitter = r.num("initial_jitter", 0.0);
    if (r.has("grasped")) {
      const json& g = r.at("grasped");
      if (!g.is_array() || g.size() != 2) throw ConfigError("object.grasped: expected two index lists");
      o.grasped = {read_indices(g[0], "object.grasped[0]"), read_indices(g[1], "object.grasped[1]")};
    }
  } else {
    throw ConfigError("object.type: expected \"rope\" or \"cloth\"");
  }
  return o;
}

/// Target entries are explicit points or generators that expand to points.
void read_targets(const json& j, std::vector<Vec3>& out) {
  if (!j.is_array()) throw ConfigError("task.targets: expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "task.targets[" + std::to_string(i) + "]";
    const json& e = j[i];
    if (e.is_array()) {
      out.push_back(Reader::as_vec3(e, path));
    } else if (e.is_object() && e.contains("grid")) {
      Reader outer(e, path, {"grid"});
      Reader g(outer.at("grid"), path + ".grid", {"min", "max", "spacing"});
      const Vec3 lo = g.vec3("min");
      const Vec3 hi = g.vec3("max");
      const double s = g.num("spacing");
      if (!(s > 0.0)) throw ConfigError(path + ".grid.spacing: must be positive");
      std::array<int, 3> n{};
      for (int k = 0; k < 3; ++k) {
        if (hi[k] < lo[k]) throw ConfigError(path + ".grid: min must be <= max");
        n[k] = static_cast<int>(std::floor((hi[k] - lo[k]) / s + 1e-9)) + 1;
      }
      for (int z = 0; z < n[2]; ++z)
        for (int y = 0; y < n[1]; ++y)
          for (int x = 0; x < n[0]; ++x) out.push_back(lo + s * Vec3(x, y, z));
    } else if (e.is_object() && e.contains("line")) {
      Reader outer(e, path, {"line"});
      Reader l(outer.at("line"), path + ".line", {"from", "to", "count"});
      const Vec3 a = l.vec3("from");
      const Vec3 b = l.vec3("to");
      const int count = l.integer("count", 2);
      if (count < 1) throw ConfigError(path + ".line.count: must be >= 1");
      for (int k = 0; k < count; ++k) {
        out.push_back(count == 1 ? a : Vec3(a + (b - a) * (static_cast<double>(k) / (count - 1))));
      }
    } else {
      throw ConfigError(path + ": expected [x, y, z], {\"grid\": ...} or {\"line\": ...}");
    }
  }
}

TaskConfig read_task(const json& j) {
  Reader r(j, "task", {"targets", "mode", "fixed_points", "cover_threshold", "omega_fraction", "lambda_s"});
  TaskConfig t;
  read_targets(r.at("targets"), t.targets);
  const std::string mode = r.str("mode", "coverage");
  if (mode == "coverage") t.mode = CorrespondenceMode::Coverage;
  else if (mode == "fixed") t.mode = CorrespondenceMode::Fixed;
  else throw ConfigError("task.mode: expected \"coverage\" or \"fixed\"");
  if (r.has("fixed_points")) t.fixed_points = read_indices(r.at("fixed_points"), "task.fixed_points");
  t.cover_threshold = r.num("cover_threshold", 0.0);
  t.omega_fraction = r.num("omega_fraction", 1.0);
  t.lambda_s = r.num("lambda_s", t.lambda_s);
  return t;
}

ControllerParams read_controller(const json& j) {
  Reader r(j, "controller", {"v_max_ee", "v_max_obs", "beta", "lambda_w", "jacobian_decay", "gripper_radius"});
  ControllerParams p;
  p.v_max_ee = r.num("v_max_ee", p.v_max_ee);
  p.v_max_obs = r.num("v_max_obs", p.v_max_obs);
  p.beta = r.num("beta", p.beta);
  p.lambda_w = r.num("lambda_w", p.lambda_w);
  p.jacobian_decay = r.num("jacobian_decay", p.jacobian_decay);
  p.gripper_radius = r.num("gripper_radius", p.gripper_radius);
  return p;
}

DeadlockParams read_deadlock(const json& j) {
  Reader r(j, "deadlock", {"horizon", "alpha", "history_window", "beta_e", "beta_m", "contact_eps"});
  DeadlockParams p;
  p.horizon = r.integer("horizon", p.horizon);
  p.alpha = r.num("alpha", p.alpha);
  p.history_window = r.integer("history_window", p.history_window);
  p.beta_e = r.num("beta_e", p.beta_e);
  p.beta_m = r.num("beta_m", p.beta_m);
  p.contact_eps = r.num("contact_eps", -1.0);
  return p;
}

PlannerParams read_planner(const json& j) {
  Reader r(j, "planner",
           {"gamma_gb", "delta_bn", "lambda_b", "delta_goal", "step", "time_budget", "restart_timeout",
            "max_samples", "smoothing_iterations", "goal_jitters", "kmeans_restarts"});
  PlannerParams p;
  p.gamma_gb = r.num("gamma_gb", p.gamma_gb);
  p.delta_bn = r.num("delta_bn", p.delta_bn);
  p.lambda_b = r.num("lambda_b", p.lambda_b);
  p.delta_goal = r.num("delta_goal", p.delta_goal);
  p.step = r.num("step", -1.0);
  p.time_budget = r.num("time_budget", p.time_budget);
  p.restart_timeout = r.num("restart_timeout", p.restart_timeout);
  if (r.has("max_samples")) {
    p.max_samples = Reader::as_index(r.at("max_samples"), "planner.max_samples");
  }
  p.smoothing_iterations = r.integer("smoothing_iterations", p.smoothing_iterations);
  p.goal_jitters = r.integer("goal_jitters", p.goal_jitters);
  p.kmeans_restarts = r.integer("kmeans_restarts", p.kmeans_restarts);
  return p;
}

SimParams read_simulator(const json& j, Topology type) {
  Reader r(j, "simulator",
           {"dt", "iterations", "substeps", "stiffness", "settle_tol", "max_settle_sweeps", "node_clearance",
            "rigidity_decay", "compression_limit"});
  SimParams p;
  p.iterations = type == Topology::Cloth ? 10 : 4;
  p.dt = r.num("dt", p.dt);
  p.iterations = r.integer("iterations", p.iterations);
  p.substeps = r.integer("substeps", p.substeps);
  p.stiffness = r.num("stiffness", p.stiffness);
  p.settle_tol = r.num("settle_tol", p.settle_tol);
  p.max_settle_sweeps = r.integer("max_settle_sweeps", p.max_settle_sweeps);
  p.node_clearance = r.num("node_clearance", -1.0);
  p.rigidity_decay = r.num("rigidity_decay", p.rigidity_decay);
  p.compression_limit = r.num("compression_limit", p.compression_limit);
  return p;
}

// ---------------------------------------------------------------- writing

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json box(const Aabb& b) { return json{{"min", vec(b.min)}, {"max", vec(b.max)}}; }

json to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  json obstacles = json::array();
  for (const auto& o : s.scene.obstacles) {
    if (const auto* b = std::get_if<Box>(&o)) {
      obstacles.push_back({{"type", "box"}, {"center", vec(b->center)}, {"half_extents", vec(b->half_extents)}});
    } else {
      const auto& c = std::get<Cylinder>(o);
      obstacles.push_back(
          {{"type", "cylinder"}, {"center", vec(c.center)}, {"radius", c.radius}, {"half_height", c.half_height}});
    }
  }
  j["scene"] = {{"bounds", box(s.scene.bounds)}, {"resolution", s.scene.resolution}, {"obstacles", obstacles}};

  const auto& o = s.object;
  json obj;
  if (o.type == Topology::Rope) {
    obj = {{"type", "rope"}, {"nodes", o.nodes}, {"length", o.length}, {"start", vec(o.start)},
           {"direction", vec(o.direction)}};
  } else {
    obj = {{"type", "cloth"}, {"rows", o.rows},     {"cols", o.cols}, {"width", o.width},
           {"height", o.height}, {"origin", vec(o.origin)}, {"u", vec(o.u)}, {"v", vec(o.v)}};
  }
  if (!o.grasped[0].empty() || !o.grasped[1].empty()) obj["grasped"] = {o.grasped[0], o.grasped[1]};
  obj["initial_jitter"] = o.initial_jitter;
  j["object"] = obj;

  json targets = json::array();
  for (const auto& t : s.task.targets) targets.push_back(vec(t));
  json task = {{"targets", targets},
               {"mode", s.task.mode == CorrespondenceMode::Coverage ? "coverage" : "fixed"}};
  if (s.task.mode == CorrespondenceMode::Fixed) task["fixed_points"] = s.task.fixed_points;
  task["cover_threshold"] = s.task.cover_threshold;
  task["omega_fraction"] = s.task.omega_fraction;
  task["lambda_s"] = s.task.lambda_s;
  j["task"] = task;

  const auto& c = s.controller;
  j["controller"] = {{"v_max_ee", c.v_max_ee},   {"v_max_obs", c.v_max_obs},
                     {"beta", c.beta},           {"lambda_w", c.lambda_w},
                     {"jacobian_decay", c.jacobian_decay}, {"gripper_radius", c.gripper_radius}};
  const auto& d = s.deadlock;
  j["deadlock"] = {{"horizon", d.horizon}, {"alpha", d.alpha},   {"history_window", d.history_window},
                   {"beta_e", d.beta_e},   {"beta_m", d.beta_m}, {"contact_eps", d.contact_eps}};
  const auto& p = s.planner;
  j["planner"] = {{"gamma_gb", p.gamma_gb},
                  {"delta_bn", p.delta_bn},
                  {"lambda_b", p.lambda_b},
                  {"delta_goal", p.delta_goal},
                  {"step", p.step},
                  {"time_budget", p.time_budget},
                  {"restart_timeout", p.restart_timeout},
                  {"max_samples", p.max_samples},
                  {"smoothing_iterations", p.smoothing_iterations},
                  {"goal_jitters", p.goal_jitters},
                  {"kmeans_restarts", p.kmeans_restarts}};
  const auto& m = s.simulator;
  j["simulator"] = {{"dt", m.dt},
                    {"iterations", m.iterations},
                    {"substeps", m.substeps},
                    {"stiffness", m.stiffness},
                    {"settle_tol", m.settle_tol},
                    {"max_settle_sweeps", m.max_settle_sweeps},
                    {"node_clearance", m.node_clearance},
                    {"rigidity_decay", m.rigidity_decay},
                    {"compression_limit", m.compression_limit}};
  j["framework"] = {{"max_steps", s.framework.max_steps}};
  j["trials"] = {{"count", s.trials.count}, {"seed", s.trials.seed}};
  json regions = json::object();
  for (const auto& [name, b] : s.regions) regions[name] = box(b);
  j["regions"] = regions;
  return j;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": parse error: " + e.what());
  }
  Reader r(j, "",
           {"name", "scene", "object", "task", "controller", "deadlock", "planner", "simulator", "framework",
            "trials", "regions"});
  Scenario s;
  s.name = r.str("name", "");
  s.scene = read_scene(r.at("scene"));
  s.object = read_object(r.at("object"));
  s.task = read_task(r.at("task"));
  if (r.has("controller")) s.controller = read_controller(r.at("controller"));
  s.controller.lambda_s = s.task.lambda_s;
  s.deadlock = r.has("deadlock") ? read_deadlock(r.at("deadlock")) : read_deadlock(json::object());
  if (s.deadlock.contact_eps < 0.0) s.deadlock.contact_eps = s.scene.resolution;
  s.planner = r.has("planner") ? read_planner(r.at("planner")) : read_planner(json::object());
  if (s.planner.step < 0.0) s.planner.step = 2.0 * s.scene.resolution;
  s.simulator = read_simulator(r.has("simulator") ? r.at("simulator") : json::object(), s.object.type);
  if (s.simulator.node_clearance < 0.0) s.simulator.node_clearance = 0.5 * s.scene.resolution;
  s.simulator.gripper_radius = s.controller.gripper_radius;
  if (r.has("framework")) {
    Reader f(r.at("framework"), "framework", {"max_steps"});
    s.framework.max_steps = f.integer("max_steps", s.framework.max_steps);
  }
  if (r.has("trials")) {
    Reader t(r.at("trials"), "trials", {"count", "seed"});
    s.trials.count = t.integer("count", 1);
    if (t.has("seed")) s.trials.seed = Reader::as_index(t.at("seed"), "trials.seed");
  }
  if (r.has("regions")) {
    const json& regs = r.at("regions");
    if (!regs.is_object()) throw ConfigError("regions: expected an object");
    for (auto it = regs.begin(); it != regs.end(); ++it) s.regions[it.key()] = read_box(it.value(), "regions." + it.key());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string());
}

std::string write_scenario(const Scenario& scenario) { return to_json(scenario).dump(2) + "\n"; }

bool operator==(const Scenario& a, const Scenario& b) { return to_json(a) == to_json(b); }

std::filesystem::path bundled_scenario_dir() { return BANDPLAN_SCENARIO_DIR; }

}  // namespace bandplan
