#include "bandplan/deadlock.hpp"

#include <algorithm>
#include <cmath>

namespace bandplan {

void DeadlockParams::validate() const {
  if (horizon < 1) throw ConfigError("deadlock.horizon: must be >= 1");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("deadlock.alpha: must be in [0, 1)");
  if (history_window < 1) throw ConfigError("deadlock.history_window: must be >= 1");
  if (!(beta_e >= 0.0)) throw ConfigError("deadlock.beta_e: must be >= 0");
  if (!(beta_m >= 0.0)) throw ConfigError("deadlock.beta_m: must be >= 0");
  if (!(contact_eps >= 0.0)) throw ConfigError("deadlock.contact_eps: must be >= 0");
}

void History::push(const Vec6& config, double error) {
  configs_.push_back(config);
  errors_.push_back(error);
  while (configs_.size() > window_) {
    configs_.pop_front();
    errors_.pop_front();
  }
}

void History::clear() {
  configs_.clear();
  errors_.clear();
}

PathFollow follow_path(const Vec6& q, std::span<const Vec6> path, std::size_t cursor, double v_max, double dt) {
  PathFollow out;
  while (cursor < path.size() && (path[cursor] - q).norm() <= 1e-9) ++cursor;
  out.cursor = cursor;
  if (cursor >= path.size()) return out;
  const Vec6 delta = path[cursor] - q;
  const double longest = std::max(delta.segment<3>(0).norm(), delta.segment<3>(3).norm());
  const double scale = std::min(1.0 / dt, v_max / longest);
  out.command = delta * scale;
  return out;
}

namespace {

Vec3 clamp_norm(const Vec3& v, double cap) {
  const double n = v.norm();
  return n > cap ? Vec3(v * (cap / n)) : v;
}

}  // namespace

Rollout rollout(const std::vector<Vec3>& points, const Vec6& grippers, const Band& band,
                const RolloutContext& ctx, int horizon, std::span<const Vec6> path, std::size_t cursor) {
  Rollout out;
  const WorldGrid& grid = *ctx.grid;
  std::vector<Vec3> p = points;
  Vec6 q = grippers;
  Band b = band;
  for (int n = 0; n < horizon; ++n) {
    if (!path.empty()) {
      const PathFollow f = follow_path(q, path, cursor, ctx.controller.v_max_ee, ctx.dt);
      cursor = f.cursor;
      q += f.command * ctx.dt;
    } else {
      const Correspondences corr = calculate_correspondences(p, grid, ctx.matching);
      const DesiredMotion e = follow_navigation_function(p, corr, grid);
      Vec6 u = find_best_robot_motion(*ctx.rigidity, e, ctx.controller.v_max_ee);
      u = obstacle_repulsion(u, q, grid, ctx.controller);
      q += u * ctx.dt;
      for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] += clamp_norm(e.velocity(j), ctx.controller.v_max_ee) * ctx.dt;
      }
    }
    try {
      b = forward_propagate(b, q.segment<3>(0), q.segment<3>(3), grid, ctx.band);
    } catch (const InvalidGripperTarget&) {
      out.truncated = true;
      break;
    }
    out.bands.push_back(b);
  }
  return out;
}

std::vector<double> annealed_lengths(std::span<const double> lengths, double alpha) {
  std::vector<double> out;
  out.reserve(lengths.size());
  for (std::size_t n = 0; n < lengths.size(); ++n) {
    if (n == 0) out.push_back(lengths[0]);
    else out.push_back(alpha * out.back() + (1.0 - alpha) * lengths[n]);
  }
  return out;
}

bool predict_overstretch(std::span<const Band> bands, double l_max, double alpha, const WorldGrid& grid,
                         double contact_eps) {
  std::vector<double> lengths;
  lengths.reserve(bands.size());
  for (const auto& b : bands) lengths.push_back(band_length(b));
  const auto filtered = annealed_lengths(lengths, alpha);
  for (std::size_t n = 0; n < bands.size(); ++n) {
    if (filtered[n] <= l_max) continue;
    // Bands in free space are left to the controller's stretching term.
    if (band_min_sdf(bands[n], grid) > contact_eps) continue;
    return true;
  }
  return false;
}

bool no_progress(const History& history, const DeadlockParams& params) {
  if (history.size() < static_cast<std::size_t>(params.history_window)) return false;
  const auto& errors = history.errors();
  const auto& configs = history.configs();
  const double improvement = errors.front() - errors.back();
  double moved = 0.0;
  for (std::size_t k = 1; k < configs.size(); ++k) moved += (configs[k] - configs[k - 1]).norm();
  return improvement < params.beta_e && moved < params.beta_m;
}

DeadlockReport predict_deadlock(const std::vector<Vec3>& points, const Vec6& grippers, double error,
                                const Band& band, const RolloutContext& ctx, const DeadlockParams& params,
                                double l_max, History& history, std::span<const Vec6> path,
                                std::size_t cursor) {
  DeadlockReport r;
  history.push(grippers, error);
  const Rollout ro = rollout(points, grippers, band, ctx, params.horizon, path, cursor);
  r.truncated = ro.truncated;
  std::vector<double> lengths;
  for (const auto& b : ro.bands) lengths.push_back(band_length(b));
  r.filtered_lengths = annealed_lengths(lengths, params.alpha);
  r.overstretch = predict_overstretch(ro.bands, l_max, params.alpha, *ctx.grid, params.contact_eps);
  r.no_progress = no_progress(history, params);
  return r;
}

}  // namespace bandplan
