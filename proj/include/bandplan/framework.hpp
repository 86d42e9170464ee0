#pragma once

#include "bandplan/scenario.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bandplan {

enum class Mode { Local, ExecutingPath };
const char* to_string(Mode mode);

/// L_max = lambda_s times the gripper-to-gripper geodesic of the flat object.
double compute_l_max(const DeformConfig& flat, double lambda_s);

/// One planner invocation inside a trial.
struct PlanEvent {
  int step = 0;
  std::string trigger;  // "overstretch" or "no_progress" (both: "overstretch+no_progress")
  bool success = false;
  PlannerStats stats;
  std::vector<Vec6> path;
  std::vector<Band> bands;
  std::array<Vec3, 2> goals{Vec3::Zero(), Vec3::Zero()};
  std::size_t blacklist_size = 0;
  int final_vis_check = 0;  // vis_check(final band, blacklist) at plan time
};

/// Per-step snapshot handed to the trajectory observer.
struct StepRecord {
  int step = 0;
  Mode mode = Mode::Local;
  Vec6 grippers = Vec6::Zero();
  const std::vector<Vec3>* points = nullptr;
  const Band* band = nullptr;
  double error = 0.0;
  double band_length = 0.0;
  double l_max = 0.0;
  double max_stretch = 0.0;
  bool overstretch = false;
  bool no_progress = false;
  std::size_t covered = 0;
  const PlanEvent* plan = nullptr;  // set on steps where the planner ran
};

enum class Outcome { Success, Failure };

struct TrialResult {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Failure;
  std::string failure_reason;
  int steps = 0;
  double final_error = 0.0;
  double l_max = 0.0;
  double wall_time = 0.0;
  int first_deadlock_step = -1;
  std::vector<PlanEvent> plans;

  int planner_invocations() const { return static_cast<int>(plans.size()); }
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Everything derived from a scenario that does not depend on the seed.
struct PreparedScenario {
  Scenario scenario;
  WorldGrid grid;
  DeformConfig flat;
  double l_max = 0.0;
  TaskMatching matching;
};

PreparedScenario prepare(const Scenario& scenario);

/// The interleaved controller / deadlock predictor / planner loop for one seed.
TrialResult main_loop(const PreparedScenario& prepared, std::uint64_t seed, const StepObserver& observer = {});

}  // namespace bandplan
