#include "bandplan/framework.hpp"

#include <chrono>
#include <cmath>

namespace bandplan {

const char* to_string(Mode mode) { return mode == Mode::Local ? "local" : "path"; }

double compute_l_max(const DeformConfig& flat, double lambda_s) {
  return lambda_s * geodesic_between_grippers(flat);
}

PreparedScenario prepare(const Scenario& scenario) {
  scenario.validate();
  PreparedScenario p{scenario, WorldGrid::build(scenario.scene), scenario.object.build(), 0.0, {}};
  p.grid.register_targets(scenario.task.targets);
  p.l_max = compute_l_max(p.flat, scenario.task.lambda_s);
  p.matching.mode = scenario.task.mode;
  p.matching.fixed_points = scenario.task.fixed_points;
  p.matching.cover_threshold = scenario.cover_threshold();
  return p;
}

namespace {

std::string trigger_name(const DeadlockReport& r) {
  if (r.overstretch && r.no_progress) return "overstretch+no_progress";
  return r.overstretch ? "overstretch" : "no_progress";
}

}  // namespace

TrialResult main_loop(const PreparedScenario& prepared, std::uint64_t seed, const StepObserver& observer) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario& sc = prepared.scenario;
  const WorldGrid& grid = prepared.grid;
  Rng rng(seed);

  DeformConfig pose = prepared.flat;
  if (sc.object.initial_jitter > 0.0) {
    std::uniform_real_distribution<double> u(-sc.object.initial_jitter, sc.object.initial_jitter);
    const Vec3 shift(u(rng), u(rng), 0.0);
    for (auto& p : pose.points) p += shift;
  }

  const Simulator sim(prepared.flat, grid, sc.simulator);
  SimState state = sim.initial_state(pose);
  const RigidityModel rigidity = RigidityModel::from_geodesics(sim.node_geodesics(), sc.controller.jacobian_decay);
  const BandParams band_params = BandParams::for_grid(grid);

  RolloutContext rctx;
  rctx.grid = &grid;
  rctx.band = band_params;
  rctx.controller = sc.controller;
  rctx.matching = prepared.matching;
  rctx.rigidity = &rigidity;
  rctx.dt = sc.simulator.dt;

  PlanningContext pctx;
  pctx.grid = &grid;
  pctx.band = band_params;
  pctx.l_max = prepared.l_max;
  pctx.gripper_radius = sc.controller.gripper_radius;
  pctx.sample_bounds = sc.scene.bounds;

  TrialResult result;
  result.seed = seed;
  result.l_max = prepared.l_max;
  History history(static_cast<std::size_t>(sc.deadlock.history_window));
  Blacklist blacklist;
  std::vector<Vec6> path;
  std::size_t cursor = 0;

  auto finish = [&](Outcome outcome, std::string reason, int steps, double error) {
    result.outcome = outcome;
    result.failure_reason = std::move(reason);
    result.steps = steps;
    result.final_error = error;
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  };

  const std::size_t n_targets = grid.target_count();
  for (int step = 0;; ++step) {
    const auto& points = state.deform.points;
    const Correspondences corr = calculate_correspondences(points, grid, prepared.matching);
    const double covered_fraction =
        n_targets == 0 ? 1.0 : static_cast<double>(corr.covered_count) / static_cast<double>(n_targets);
    if (covered_fraction >= sc.task.omega_fraction) return finish(Outcome::Success, "", step, corr.error);
    if (step >= sc.framework.max_steps) return finish(Outcome::Failure, "step budget exhausted", step, corr.error);

    const Vec3 g0 = state.grippers.segment<3>(0);
    const Vec3 g1 = state.grippers.segment<3>(3);
    const Band band = initialize_band(state.deform, g0, g1, grid, band_params);
    const DeadlockReport report = predict_deadlock(points, state.grippers, corr.error, band, rctx, sc.deadlock,
                                                   prepared.l_max, history, path, cursor);

    const PlanEvent* plan_event = nullptr;
    if (report.deadlock()) {
      if (result.first_deadlock_step < 0) result.first_deadlock_step = step;
      blacklist.push_back(band);
      std::vector<Vec3> uncovered;
      for (std::size_t t : corr.uncovered()) uncovered.push_back(grid.target(t));
      PlanEvent ev;
      ev.step = step;
      ev.trigger = trigger_name(report);
      ev.blacklist_size = blacklist.size();
      PlanResult plan = plan_path(state.grippers, band, uncovered, blacklist, sc.planner, pctx, rng);
      ev.success = plan.success;
      ev.stats = plan.stats;
      ev.goals = plan.goal.ee_goals;
      if (plan.success) {
        ev.final_vis_check = vis_check(plan.bands.back(), blacklist, grid);
        ev.path = std::move(plan.path);
        ev.bands = std::move(plan.bands);
      }
      result.plans.push_back(std::move(ev));
      plan_event = &result.plans.back();
      if (!plan.success) {
        if (observer) {
          StepRecord rec{step, Mode::Local, state.grippers, &points, &band, corr.error, band_length(band),
                         prepared.l_max, state.max_stretch, report.overstretch, report.no_progress,
                         corr.covered_count, plan_event};
          observer(rec);
        }
        return finish(Outcome::Failure, "planner failure", step, corr.error);
      }
      path = result.plans.back().path;
      cursor = 0;
      history.clear();
    }

    Vec6 cmd = Vec6::Zero();
    Mode mode = Mode::Local;
    if (!path.empty()) {
      const PathFollow f = follow_path(state.grippers, path, cursor, sc.controller.v_max_ee, sc.simulator.dt);
      cursor = f.cursor;
      if (cursor >= path.size()) {
        path.clear();
        cursor = 0;
      } else {
        cmd = f.command;
        mode = Mode::ExecutingPath;
      }
    }
    if (mode == Mode::Local) {
      cmd = controller_command(points, state.grippers, corr, prepared.flat.rest_distances, rigidity, grid,
                               sc.controller);
    }

    if (observer) {
      StepRecord rec{step, mode, state.grippers, &points, &band, corr.error, band_length(band), prepared.l_max,
                     state.max_stretch, report.overstretch, report.no_progress, corr.covered_count, plan_event};
      observer(rec);
    }
    sim.advance(state, cmd);
  }
}

}  // namespace bandplan
