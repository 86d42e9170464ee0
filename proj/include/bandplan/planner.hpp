#pragma once

#include "bandplan/band.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace bandplan {

using Rng = std::mt19937_64;

/// Planner state: both gripper centers and the band between them.
struct FullConfig {
  Vec6 q = Vec6::Zero();
  Band band;
};

/// RRT vertex store. Upsampled bands are cached for the band-distance term.
class PlanTree {
 public:
  std::size_t add(FullConfig config, std::int64_t parent, double cost);
  void clear();

  std::size_t size() const { return vertices_.size(); }
  bool empty() const { return vertices_.empty(); }
  const FullConfig& vertex(std::size_t i) const { return vertices_[i]; }
  std::int64_t parent(std::size_t i) const { return parents_[i]; }
  double cost(std::size_t i) const { return costs_[i]; }
  const Eigen::VectorXd& upsampled(std::size_t i) const { return upsampled_[i]; }
  /// Bounding box of every band point stored so far.
  const Aabb& band_bounds() const { return band_bounds_; }
  /// Vertex indices from the root to i.
  std::vector<std::size_t> path_to(std::size_t i) const;

 private:
  std::vector<FullConfig> vertices_;
  std::vector<std::int64_t> parents_;
  std::vector<double> costs_;
  std::vector<Eigen::VectorXd> upsampled_;
  Aabb band_bounds_;
};

struct GoalSpec {
  std::array<Vec3, 2> ee_goals{Vec3::Zero(), Vec3::Zero()};
  double delta_goal = 0.02;
  Blacklist blacklist;
  std::vector<Vec6> goal_configs;
};

struct PlannerParams {
  double gamma_gb = 0.1;       // goal bias
  double delta_bn = 0.001;     // best-nearest radius
  double lambda_b = 1e-6;      // band distance scale
  double delta_goal = 0.02;    // workspace goal radius (m)
  double step = 0.04;          // extension step in robot space (m)
  double time_budget = 60.0;   // s
  double restart_timeout = 60.0;  // s per attempt
  std::size_t max_samples = 50000;
  int smoothing_iterations = 500;
  int goal_jitters = 8;
  int kmeans_restarts = 10;

  void validate() const;
};

/// Geometry and limits shared by every planner operation.
struct PlanningContext {
  const WorldGrid* grid = nullptr;
  BandParams band;
  double l_max = 0.0;
  double gripper_radius = 0.025;
  Aabb sample_bounds;
};

struct PlannerStats {
  std::size_t samples = 0;
  std::size_t iterations = 0;
  std::size_t goal_bias_attempts = 0;
  std::size_t vertices = 0;
  std::size_t restarts = 0;
  double nn_time = 0.0;
  double validity_time = 0.0;
  double total_time = 0.0;
  double smoothing_time = 0.0;
  int smoothing_iterations = 0;
  int smoothing_accepted = 0;
};

double full_distance(const FullConfig& a, const FullConfig& b, double lambda_b);

/// Robot configuration uniform per axis; band of kMaxBandPoints uniform points.
FullConfig sample_uniform(const Aabb& bounds, Rng& rng);

/// Two-stage best-nearest selection (minimum cost within delta_bn, else the
/// full-space nearest found through a robot-space candidate radius).
std::size_t best_nearest(const PlanTree& tree, const FullConfig& q_rand, double delta_bn, double lambda_b,
                         const Aabb& workspace);
/// Exhaustive full-space argmin (lowest index on ties).
std::size_t brute_force_nearest(const PlanTree& tree, const FullConfig& q_rand, double lambda_b);

/// Valid robot configuration: both gripper spheres clear of obstacles.
bool grippers_free(const Vec6& q, const PlanningContext& ctx);
/// Valid motion between configurations: swept gripper spheres clear.
bool grippers_sweep_free(const Vec6& a, const Vec6& b, const PlanningContext& ctx);
/// Band validity: length <= L_max and no point inside an obstacle.
bool band_valid(const Band& band, const PlanningContext& ctx);

/// Extends the tree from `from` toward q_target in steps <= step; returns the
/// indices of the vertices created, in order.
std::vector<std::size_t> connect(PlanTree& tree, std::size_t from, const Vec6& q_target,
                                 const PlanningContext& ctx, double step, PlannerStats* stats = nullptr);

bool goal_check(const FullConfig& config, const GoalSpec& goal, const WorldGrid& grid);

struct PlanResult {
  bool success = false;
  std::vector<Vec6> path;
  std::vector<Band> bands;  // band at each waypoint
  PlannerStats stats;
  GoalSpec goal;
};

PlanResult rrt_eb(const FullConfig& start, const GoalSpec& goal, const PlannerParams& params,
                  const PlanningContext& ctx, Rng& rng);

/// Robot-space path length.
double path_length(std::span<const Vec6> path);

/// Randomized shortcutting; output never longer and still reaching the goal.
/// `bands` must hold the band at every waypoint (bands[0] is the start band).
void shortcut_smooth(std::vector<Vec6>& path, std::vector<Band>& bands, const GoalSpec& goal,
                     const PlannerParams& params, const PlanningContext& ctx, Rng& rng,
                     PlannerStats* stats = nullptr);

struct KMeansResult {
  std::array<Vec3, 2> centers;
  std::vector<int> labels;
  double inertia = 0.0;
};

/// Lloyd 2-means, best of `restarts` deterministically seeded runs.
KMeansResult two_means(std::span<const Vec3> points, int restarts);

/// Goal specification for the uncovered targets: clusters projected out of
/// collision and assigned to the grippers by minimal total distance.
GoalSpec make_goal(std::span<const Vec3> uncovered_targets, const Vec6& grippers, const Blacklist& blacklist,
                   const PlannerParams& params, const PlanningContext& ctx, Rng& rng);

/// Clusters the uncovered targets, plans with RRT-EB and smooths the result.
/// Throws TaskComplete when there are no uncovered targets.
PlanResult plan_path(const Vec6& grippers, const Band& band, std::span<const Vec3> uncovered_targets,
                     const Blacklist& blacklist, const PlannerParams& params, const PlanningContext& ctx,
                     Rng& rng);

}  // namespace bandplan
