#include "bandplan/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace bandplan {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Aabb empty_box() {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vec3::Constant(inf), Vec3::Constant(-inf)};
}

void extend(Aabb& box, const Vec3& p) {
  box.min = box.min.cwiseMin(p);
  box.max = box.max.cwiseMax(p);
}

}  // namespace

void PlannerParams::validate() const {
  if (!(gamma_gb >= 0.0 && gamma_gb <= 1.0)) throw ConfigError("planner.gamma_gb: must be in [0, 1]");
  if (!(delta_bn > 0.0)) throw ConfigError("planner.delta_bn: must be positive");
  if (!(lambda_b > 0.0)) throw ConfigError("planner.lambda_b: must be positive");
  if (!(delta_goal > 0.0)) throw ConfigError("planner.delta_goal: must be positive");
  if (!(step > 0.0)) throw ConfigError("planner.step: must be positive");
  if (!(time_budget > 0.0)) throw ConfigError("planner.time_budget: must be positive");
  if (!(restart_timeout > 0.0)) throw ConfigError("planner.restart_timeout: must be positive");
  if (max_samples == 0) throw ConfigError("planner.max_samples: must be positive");
  if (smoothing_iterations < 0) throw ConfigError("planner.smoothing_iterations: must be >= 0");
  if (goal_jitters < 0) throw ConfigError("planner.goal_jitters: must be >= 0");
  if (kmeans_restarts < 1) throw ConfigError("planner.kmeans_restarts: must be >= 1");
}

std::size_t PlanTree::add(FullConfig config, std::int64_t parent, double cost) {
  if (vertices_.empty()) band_bounds_ = empty_box();
  for (const auto& p : config.band.points) extend(band_bounds_, p);
  upsampled_.push_back(upsample_flat(config.band));
  vertices_.push_back(std::move(config));
  parents_.push_back(parent);
  costs_.push_back(cost);
  return vertices_.size() - 1;
}

void PlanTree::clear() {
  vertices_.clear();
  parents_.clear();
  costs_.clear();
  upsampled_.clear();
  band_bounds_ = empty_box();
}

std::vector<std::size_t> PlanTree::path_to(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::int64_t cur = static_cast<std::int64_t>(i); cur >= 0; cur = parents_[static_cast<std::size_t>(cur)]) {
    out.push_back(static_cast<std::size_t>(cur));
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double full_distance(const FullConfig& a, const FullConfig& b, double lambda_b) {
  const double dr = (a.q - b.q).norm();
  const double db = band_distance(a.band, b.band);
  return std::sqrt(dr * dr + lambda_b * db * db);
}

FullConfig sample_uniform(const Aabb& bounds, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto point = [&] {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = bounds.min[k] + u(rng) * (bounds.max[k] - bounds.min[k]);
    return p;
  };
  FullConfig c;
  const Vec3 a = point();
  const Vec3 b = point();
  c.q = pack_grippers(a, b);
  c.band.points.reserve(kMaxBandPoints);
  for (std::size_t k = 0; k < kMaxBandPoints; ++k) c.band.points.push_back(point());
  return c;
}

std::size_t best_nearest(const PlanTree& tree, const FullConfig& q_rand, double delta_bn, double lambda_b,
                         const Aabb& workspace) {
  const std::size_t n = tree.size();
  const Eigen::VectorXd up = upsample_flat(q_rand.band);
  std::vector<double> dr2(n);
  double near_r2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    dr2[i] = (tree.vertex(i).q - q_rand.q).squaredNorm();
    near_r2 = std::min(near_r2, dr2[i]);
  }
  auto df2 = [&](std::size_t i) { return dr2[i] + lambda_b * (tree.upsampled(i) - up).squaredNorm(); };

  // Stage 1: cheapest vertex within delta_bn in the full space. Only vertices
  // within delta_bn in robot space can qualify.
  const double bn2 = delta_bn * delta_bn;
  std::int64_t best = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (dr2[i] > bn2 || df2(i) > bn2) continue;
    if (best < 0 || tree.cost(i) < tree.cost(static_cast<std::size_t>(best))) best = static_cast<std::int64_t>(i);
  }
  if (best >= 0) return static_cast<std::size_t>(best);

  // Stage 2: any vertex farther than D_max,f in robot space is farther than
  // the robot-space nearest in the full space, because every pointwise band
  // difference is bounded by the diagonal of the region holding all points.
  Aabb box = workspace;
  const Aabb& bb = tree.band_bounds();
  box.min = box.min.cwiseMin(bb.min);
  box.max = box.max.cwiseMax(bb.max);
  for (const auto& p : q_rand.band.points) extend(box, p);
  const double max_w2 = (box.max - box.min).squaredNorm();
  const double radius2 = near_r2 + lambda_b * static_cast<double>(kMaxBandPoints) * max_w2;
  std::size_t arg = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (dr2[i] > radius2) continue;
    const double d = df2(i);
    if (d < best_d) {
      best_d = d;
      arg = i;
    }
  }
  return arg;
}

std::size_t brute_force_nearest(const PlanTree& tree, const FullConfig& q_rand, double lambda_b) {
  std::size_t arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const double d = full_distance(tree.vertex(i), q_rand, lambda_b);
    if (d < best) {
      best = d;
      arg = i;
    }
  }
  return arg;
}

bool grippers_free(const Vec6& q, const PlanningContext& ctx) {
  for (int g = 0; g < 2; ++g) {
    const Vec3 p = q.segment<3>(3 * g);
    if (!ctx.sample_bounds.contains(p)) return false;
    if (ctx.grid->sdf(p) < ctx.gripper_radius) return false;
  }
  return true;
}

bool grippers_sweep_free(const Vec6& a, const Vec6& b, const PlanningContext& ctx) {
  for (int g = 0; g < 2; ++g) {
    if (!ctx.grid->segment_collision_free(a.segment<3>(3 * g), b.segment<3>(3 * g), ctx.gripper_radius)) {
      return false;
    }
  }
  return true;
}

bool band_valid(const Band& band, const PlanningContext& ctx) {
  if (band_length(band) > ctx.l_max) return false;
  return band_min_sdf(band, *ctx.grid) >= 0.0;
}

namespace {

/// Band at configuration `next` reached from (`prev`, `band`), or nullopt
/// when the step is invalid.
std::optional<Band> propagate_step(const Vec6& prev, const Vec6& next, const Band& band,
                                   const PlanningContext& ctx) {
  if (!grippers_free(next, ctx) || !grippers_sweep_free(prev, next, ctx)) return std::nullopt;
  Band b;
  try {
    b = forward_propagate(band, next.segment<3>(0), next.segment<3>(3), *ctx.grid, ctx.band);
  } catch (const InvalidGripperTarget&) {
    return std::nullopt;
  }
  if (!band_valid(b, ctx)) return std::nullopt;
  return b;
}

}  // namespace

std::vector<std::size_t> connect(PlanTree& tree, std::size_t from, const Vec6& q_target,
                                 const PlanningContext& ctx, double step, PlannerStats* stats) {
  std::vector<std::size_t> created;
  const Vec6 q_from = tree.vertex(from).q;
  const double dist = (q_target - q_from).norm();
  if (dist < 1e-12) return created;
  const int pieces = static_cast<int>(std::ceil(dist / step - 1e-9));
  std::size_t prev = from;
  const auto t0 = Clock::now();
  for (int k = 1; k <= pieces; ++k) {
    const Vec6 qk = k == pieces ? q_target : Vec6(q_from + (q_target - q_from) * (static_cast<double>(k) / pieces));
    const FullConfig& pv = tree.vertex(prev);
    auto band = propagate_step(pv.q, qk, pv.band, ctx);
    if (!band) break;
    const double cost = tree.cost(prev) + (qk - pv.q).norm();
    prev = tree.add(FullConfig{qk, std::move(*band)}, static_cast<std::int64_t>(prev), cost);
    created.push_back(prev);
  }
  if (stats) stats->validity_time += seconds_since(t0);
  return created;
}

bool goal_check(const FullConfig& config, const GoalSpec& goal, const WorldGrid& grid) {
  for (int g = 0; g < 2; ++g) {
    if ((config.q.segment<3>(3 * g) - goal.ee_goals[g]).norm() > goal.delta_goal) return false;
  }
  return vis_check(config.band, goal.blacklist, grid) == 0;
}

namespace {

PlanResult extract(const PlanTree& tree, std::size_t goal_vertex) {
  PlanResult r;
  r.success = true;
  for (std::size_t i : tree.path_to(goal_vertex)) {
    r.path.push_back(tree.vertex(i).q);
    r.bands.push_back(tree.vertex(i).band);
  }
  return r;
}

std::optional<std::size_t> first_goal(const PlanTree& tree, const std::vector<std::size_t>& created,
                                      const GoalSpec& goal, const WorldGrid& grid) {
  for (std::size_t i : created) {
    if (goal_check(tree.vertex(i), goal, grid)) return i;
  }
  return std::nullopt;
}

}  // namespace

PlanResult rrt_eb(const FullConfig& start, const GoalSpec& goal, const PlannerParams& params,
                  const PlanningContext& ctx, Rng& rng) {
  const auto t_start = Clock::now();
  PlannerStats stats;
  PlanTree tree;
  tree.add(start, -1, 0.0);
  auto finish = [&](PlanResult r) {
    stats.vertices += tree.size();
    stats.total_time = seconds_since(t_start);
    r.stats = stats;
    r.goal = goal;
    return r;
  };
  if (goal_check(start, goal, *ctx.grid)) return finish(extract(tree, 0));

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto attempt_start = Clock::now();
  while (stats.samples < params.max_samples && seconds_since(t_start) < params.time_budget) {
    if (seconds_since(attempt_start) > params.restart_timeout) {
      stats.vertices += tree.size() - 1;
      tree.clear();
      tree.add(start, -1, 0.0);
      attempt_start = Clock::now();
      ++stats.restarts;
    }
    ++stats.iterations;
    const FullConfig q_rand = sample_uniform(ctx.sample_bounds, rng);
    ++stats.samples;
    const auto t_nn = Clock::now();
    const std::size_t near = best_nearest(tree, q_rand, params.delta_bn, params.lambda_b, ctx.sample_bounds);
    stats.nn_time += seconds_since(t_nn);
    const auto created = connect(tree, near, q_rand.q, ctx, params.step, &stats);
    if (auto g = first_goal(tree, created, goal, *ctx.grid)) return finish(extract(tree, *g));

    if (coin(rng) < params.gamma_gb && !goal.goal_configs.empty()) {
      ++stats.goal_bias_attempts;
      const std::size_t last = created.empty() ? near : created.back();
      const Vec6& q_last = tree.vertex(last).q;
      std::size_t best = 0;
      for (std::size_t k = 1; k < goal.goal_configs.size(); ++k) {
        if ((goal.goal_configs[k] - q_last).norm() < (goal.goal_configs[best] - q_last).norm()) best = k;
      }
      const auto to_goal = connect(tree, last, goal.goal_configs[best], ctx, params.step, &stats);
      if (auto g = first_goal(tree, to_goal, goal, *ctx.grid)) return finish(extract(tree, *g));
    }
  }
  return finish(PlanResult{});
}

double path_length(std::span<const Vec6> path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  return len;
}

namespace {

/// Appends the straight segment (a, b] split into pieces no longer than step.
void append_straight(std::vector<Vec6>& out, const Vec6& a, const Vec6& b, double step) {
  const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step - 1e-9)));
  for (int k = 1; k <= pieces; ++k) {
    out.push_back(k == pieces ? b : Vec6(a + (b - a) * (static_cast<double>(k) / pieces)));
  }
}

}  // namespace

void shortcut_smooth(std::vector<Vec6>& path, std::vector<Band>& bands, const GoalSpec& goal,
                     const PlannerParams& params, const PlanningContext& ctx, Rng& rng, PlannerStats* stats) {
  const auto t0 = Clock::now();
  int accepted = 0;
  int it = 0;
  for (; it < params.smoothing_iterations; ++it) {
    const std::size_t n = path.size();
    if (n < 3) break;
    std::uniform_int_distribution<std::size_t> pick_i(0, n - 3);
    const std::size_t i = pick_i(rng);
    std::uniform_int_distribution<std::size_t> pick_j(i + 2, n - 1);
    const std::size_t j = pick_j(rng);
    std::uniform_int_distribution<int> pick_mode(0, 2);
    const int mode = pick_mode(rng);  // 0/1: that gripper only, 2: both

    std::vector<Vec6> segment;
    if (mode == 2) {
      append_straight(segment, path[i], path[j], params.step);
    } else {
      Vec6 prev = path[i];
      const Vec3 gi = path[i].segment<3>(3 * mode);
      const Vec3 gj = path[j].segment<3>(3 * mode);
      for (std::size_t k = i + 1; k <= j; ++k) {
        Vec6 q = path[k];
        q.segment<3>(3 * mode) = gi + (gj - gi) * (static_cast<double>(k - i) / static_cast<double>(j - i));
        append_straight(segment, prev, q, params.step);
        prev = q;
      }
    }
    std::vector<Vec6> candidate(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    candidate.insert(candidate.end(), segment.begin(), segment.end());
    candidate.insert(candidate.end(), path.begin() + static_cast<std::ptrdiff_t>(j) + 1, path.end());
    if (path_length(candidate) >= path_length(path) - 1e-12) continue;

    std::vector<Band> cand_bands(bands.begin(), bands.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    bool ok = true;
    for (std::size_t k = i + 1; k < candidate.size() && ok; ++k) {
      auto b = propagate_step(candidate[k - 1], candidate[k], cand_bands.back(), ctx);
      if (!b) ok = false;
      else cand_bands.push_back(std::move(*b));
    }
    if (!ok) continue;
    if (!goal_check(FullConfig{candidate.back(), cand_bands.back()}, goal, *ctx.grid)) continue;
    path = std::move(candidate);
    bands = std::move(cand_bands);
    ++accepted;
  }
  if (stats) {
    stats->smoothing_time += seconds_since(t0);
    stats->smoothing_iterations += it;
    stats->smoothing_accepted += accepted;
  }
}

namespace {

/// Single-point (Hartigan) moves: relocate a point whenever that lowers the
/// total within-cluster cost, accounting for both centroid shifts. Escapes
/// many of the fixed points where plain Lloyd iterations stall.
void hartigan_refine(std::span<const Vec3> points, std::array<Vec3, 2>& c, std::vector<int>& labels) {
  std::array<int, 2> count{0, 0};
  for (int l : labels) ++count[l];
  bool moved = true;
  for (int sweep = 0; moved && sweep < 100; ++sweep) {
    moved = false;
    for (std::size_t k = 0; k < points.size(); ++k) {
      const int a = labels[k];
      const int b = 1 - a;
      if (count[a] < 2) continue;
      const double na = count[a];
      const double nb = count[b];
      const double gain = na / (na - 1.0) * (points[k] - c[a]).squaredNorm();
      const double cost = nb / (nb + 1.0) * (points[k] - c[b]).squaredNorm();
      if (cost >= gain - 1e-15) continue;
      c[a] = (c[a] * na - points[k]) / (na - 1.0);
      c[b] = (c[b] * nb + points[k]) / (nb + 1.0);
      --count[a];
      ++count[b];
      labels[k] = b;
      moved = true;
    }
  }
}

}  // namespace

KMeansResult two_means(std::span<const Vec3> points, int restarts) {
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("two_means: no points");
  for (int r = 0; r < restarts; ++r) {
    // k-means++ seeding with a per-restart deterministic stream.
    Rng rng(static_cast<std::uint64_t>(r) + 1);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::array<Vec3, 2> c;
    c[0] = points[pick(rng)];
    std::vector<double> d2(n);
    for (std::size_t k = 0; k < n; ++k) d2[k] = (points[k] - c[0]).squaredNorm();
    double total = 0.0;
    for (double v : d2) total += v;
    if (total > 0.0) {
      std::discrete_distribution<std::size_t> weighted(d2.begin(), d2.end());
      c[1] = points[weighted(rng)];
    } else {
      c[1] = c[0];
    }
    std::vector<int> labels(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (std::size_t k = 0; k < n; ++k) {
        const int l = (points[k] - c[1]).squaredNorm() < (points[k] - c[0]).squaredNorm() ? 1 : 0;
        if (l != labels[k]) changed = true;
        labels[k] = l;
      }
      std::array<Vec3, 2> sum{Vec3::Zero(), Vec3::Zero()};
      std::array<int, 2> count{0, 0};
      for (std::size_t k = 0; k < n; ++k) {
        sum[labels[k]] += points[k];
        ++count[labels[k]];
      }
      for (int g = 0; g < 2; ++g)
        if (count[g] > 0) c[g] = sum[g] / count[g];
      if (!changed && iter > 0) break;
    }
    const bool both_used = std::find(labels.begin(), labels.end(), 1) != labels.end() &&
                           std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (both_used) hartigan_refine(points, c, labels);
    double inertia = 0.0;
    for (std::size_t k = 0; k < n; ++k) inertia += (points[k] - c[labels[k]]).squaredNorm();
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.centers = c;
      best.labels = labels;
    }
  }
  return best;
}

GoalSpec make_goal(std::span<const Vec3> uncovered_targets, const Vec6& grippers, const Blacklist& blacklist,
                   const PlannerParams& params, const PlanningContext& ctx, Rng& rng) {
  if (uncovered_targets.empty()) throw TaskComplete("task already complete");
  const KMeansResult km = two_means(uncovered_targets, params.kmeans_restarts);
  const WorldGrid& grid = *ctx.grid;
  std::array<Vec3, 2> c;
  for (int g = 0; g < 2; ++g) {
    c[g] = grid.project_out_of_collision(ctx.sample_bounds.clamp(km.centers[g]), ctx.gripper_radius + 1e-6);
  }
  const Vec3 g0 = grippers.segment<3>(0);
  const Vec3 g1 = grippers.segment<3>(3);
  const double keep = (g0 - c[0]).norm() + (g1 - c[1]).norm();
  const double swap = (g0 - c[1]).norm() + (g1 - c[0]).norm();
  if (swap < keep) std::swap(c[0], c[1]);

  GoalSpec goal;
  goal.ee_goals = c;
  goal.delta_goal = params.delta_goal;
  goal.blacklist = blacklist;
  goal.goal_configs.push_back(pack_grippers(c[0], c[1]));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto jitter = [&] {
    Vec3 d;
    do {
      d = Vec3(u(rng), u(rng), u(rng));
    } while (d.squaredNorm() > 1.0);
    return Vec3(d * (0.5 * params.delta_goal));
  };
  for (int k = 0; k < params.goal_jitters; ++k) {
    Vec6 q = pack_grippers(ctx.sample_bounds.clamp(c[0] + jitter()), ctx.sample_bounds.clamp(c[1] + jitter()));
    if (grippers_free(q, ctx)) goal.goal_configs.push_back(q);
  }
  return goal;
}

PlanResult plan_path(const Vec6& grippers, const Band& band, std::span<const Vec3> uncovered_targets,
                     const Blacklist& blacklist, const PlannerParams& params, const PlanningContext& ctx,
                     Rng& rng) {
  const GoalSpec goal = make_goal(uncovered_targets, grippers, blacklist, params, ctx, rng);
  PlanResult r = rrt_eb(FullConfig{grippers, band}, goal, params, ctx, rng);
  if (r.success) {
    const double t_plan = r.stats.total_time;
    shortcut_smooth(r.path, r.bands, goal, params, ctx, rng, &r.stats);
    r.stats.total_time = t_plan;
  }
  return r;
}

}  // namespace bandplan
