#pragma once

#include "bandplan/controller.hpp"
#include "bandplan/deadlock.hpp"
#include "bandplan/planner.hpp"
#include "bandplan/simulator.hpp"
#include "bandplan/worldgrid.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bandplan {

struct ObjectSpec {
  Topology type = Topology::Rope;
  // rope
  int nodes = 39;
  double length = 0.78;
  Vec3 start = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  // cloth
  int rows = 25;
  int cols = 15;
  double width = 0.3;   // along u, between the grasped corners
  double height = 0.5;  // along v
  Vec3 origin = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  std::array<std::vector<std::size_t>, 2> grasped;  // empty: rope ends / cloth corners (0, cols-1)
  /// Per-seed uniform translation noise of the initial pose (m, per axis, in
  /// the plane spanned by the object).
  double initial_jitter = 0.0;

  /// Relaxed configuration used for D, geodesics and L_max.
  DeformConfig build() const;
};

struct TaskConfig {
  std::vector<Vec3> targets;
  CorrespondenceMode mode = CorrespondenceMode::Coverage;
  std::vector<std::size_t> fixed_points;  // Fixed mode: object point per target
  double cover_threshold = 0.0;           // 0: twice the grid resolution
  double omega_fraction = 1.0;            // covered fraction that ends the task
  double lambda_s = 1.17;
};

struct FrameworkParams {
  int max_steps = 20000;
};

struct TrialsConfig {
  int count = 1;
  std::uint64_t seed = 0;
};

/// A complete experiment description.
struct Scenario {
  std::string name;
  Scene scene;
  ObjectSpec object;
  TaskConfig task;
  ControllerParams controller;
  DeadlockParams deadlock;
  PlannerParams planner;
  SimParams simulator;
  FrameworkParams framework;
  TrialsConfig trials;
  std::map<std::string, Aabb> regions;  // named annotation boxes (e.g. slits)

  /// Throws ConfigError naming the offending field.
  void validate() const;
  double cover_threshold() const {
    return task.cover_threshold > 0.0 ? task.cover_threshold : 2.0 * scene.resolution;
  }
};

Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& json_text, const std::string& source = "<string>");
std::string write_scenario(const Scenario& scenario);
bool operator==(const Scenario& a, const Scenario& b);

/// Directory holding the bundled scenario files.
std::filesystem::path bundled_scenario_dir();

}  // namespace bandplan
