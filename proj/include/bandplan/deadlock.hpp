#pragma once

#include "bandplan/band.hpp"
#include "bandplan/controller.hpp"

#include <deque>
#include <span>
#include <vector>

namespace bandplan {

struct DeadlockParams {
  int horizon = 10;          // N_p
  double alpha = 0.3;        // annealing constant
  int history_window = 100;  // N_h
  double beta_e = 1.0;       // error improvement threshold
  double beta_m = 0.03;      // configuration distance threshold (m)
  double contact_eps = 0.02; // band "touches" an obstacle when min sdf <= contact_eps

  void validate() const;
};

/// Time-aligned ring buffers of gripper configurations and task errors.
class History {
 public:
  explicit History(std::size_t window = 100) : window_(window) {}

  void push(const Vec6& config, double error);
  void clear();
  std::size_t size() const { return configs_.size(); }
  std::size_t window() const { return window_; }
  bool full() const { return configs_.size() >= window_; }
  const std::deque<Vec6>& configs() const { return configs_; }
  const std::deque<double>& errors() const { return errors_; }

 private:
  std::size_t window_;
  std::deque<Vec6> configs_;
  std::deque<double> errors_;
};

struct PathFollow {
  Vec6 command = Vec6::Zero();
  std::size_t cursor = 0;  // waypoint being approached (== size when finished)
};

/// Straight-line servoing toward path[cursor] at speed <= v_max per gripper.
/// Waypoints already reached (within 1e-9) are skipped first.
PathFollow follow_path(const Vec6& q, std::span<const Vec6> path, std::size_t cursor, double v_max, double dt);

/// Everything the rollout needs to imitate the controller.
struct RolloutContext {
  const WorldGrid* grid = nullptr;
  BandParams band;
  ControllerParams controller;
  TaskMatching matching;
  const RigidityModel* rigidity = nullptr;
  double dt = 0.02;
};

struct Rollout {
  std::vector<Band> bands;
  bool truncated = false;  // a predicted gripper target entered an obstacle
};

/// Predicts the band over the horizon: with no active path, a gross-motion
/// rollout of the navigation term (no stretching terms); with a path, the
/// grippers follow the remaining waypoints.
Rollout rollout(const std::vector<Vec3>& points, const Vec6& grippers, const Band& band,
                const RolloutContext& ctx, int horizon, std::span<const Vec6> path = {},
                std::size_t cursor = 0);

/// Low-pass filtered band lengths: first equals the first length, then
/// L~_n = alpha * L~_{n-1} + (1 - alpha) * L_n.
std::vector<double> annealed_lengths(std::span<const double> lengths, double alpha);

bool predict_overstretch(std::span<const Band> bands, double l_max, double alpha, const WorldGrid& grid,
                         double contact_eps);

bool no_progress(const History& history, const DeadlockParams& params);

struct DeadlockReport {
  bool overstretch = false;
  bool no_progress = false;
  bool truncated = false;
  std::vector<double> filtered_lengths;

  bool deadlock() const { return overstretch || no_progress; }
};

/// Records (q, error) in the history, rolls out the band and applies both
/// deadlock tests.
DeadlockReport predict_deadlock(const std::vector<Vec3>& points, const Vec6& grippers, double error,
                                const Band& band, const RolloutContext& ctx, const DeadlockParams& params,
                                double l_max, History& history, std::span<const Vec6> path = {},
                                std::size_t cursor = 0);

}  // namespace bandplan
