#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bandplan;

namespace {

Scene pillar_scene() {
  Scene s;
  s.bounds = {Vec3(-0.4, -0.4, 0.0), Vec3(0.4, 0.4, 0.2)};
  s.resolution = 0.02;
  s.obstacles.push_back(Cylinder{Vec3(0, 0, 0.1), 0.05, 0.5});
  return s;
}

Band straight(const Vec3& a, const Vec3& b, double spacing = 0.02) {
  return Band{interpolate_points(std::vector<Vec3>{a, b}, spacing)};
}

PlanningContext context(const WorldGrid& grid, double l_max) {
  PlanningContext ctx;
  ctx.grid = &grid;
  ctx.band = BandParams::for_grid(grid);
  ctx.l_max = l_max;
  ctx.gripper_radius = 0.02;
  ctx.sample_bounds = grid.bounds();
  return ctx;
}

/// Random band of 2..40 points inside the unit cube.
Band random_band(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = std::uniform_int_distribution<int>(2, 40)(rng);
  Band b;
  for (int k = 0; k < n; ++k) b.points.emplace_back(u(rng), u(rng), u(rng));
  return b;
}

FullConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FullConfig c;
  for (int a = 0; a < 6; ++a) c.q[a] = u(rng);
  c.band = random_band(rng);
  return c;
}

}  // namespace

TEST_CASE("full_distance: identity, robot-only offset, weight of the band term") {
  const FullConfig a{Vec6::Zero(), straight(Vec3::Zero(), Vec3(1, 0, 0))};
  CHECK(full_distance(a, a, 1e-6) == 0.0);
  FullConfig b = a;
  b.q[0] = 1.0;
  CHECK(full_distance(a, b, 1e-6) == doctest::Approx(1.0));
  // A band difference of 100 adds 1e-6 * 1e4 = 1e-2 under the root.
  FullConfig c = a;
  c.q[0] = 0.1;
  for (auto& p : c.band.points) p += Vec3(0, 100.0 / std::sqrt(static_cast<double>(kMaxBandPoints)), 0);
  CHECK(band_distance(a.band, c.band) == doctest::Approx(100.0));
  CHECK(full_distance(a, c, 1e-6) == doctest::Approx(std::sqrt(0.01 + 0.01)));
}

TEST_CASE("sample_uniform: deterministic per seed and unbiased per axis") {
  const Aabb box{Vec3(-1, 0, 2), Vec3(1, 4, 3)};
  Rng r1(9), r2(9);
  const auto a = sample_uniform(box, r1);
  const auto b = sample_uniform(box, r2);
  CHECK((a.q - b.q).norm() == 0.0);
  CHECK(a.band.size() == kMaxBandPoints);
  CHECK(band_distance(a.band, b.band) == 0.0);

  Rng rng(1);
  Vec6 sum = Vec6::Zero();
  const int n = 10000;
  for (int k = 0; k < n; ++k) sum += sample_uniform(box, rng).q;
  const Vec6 mean = sum / n;
  for (int g = 0; g < 2; ++g)
    for (int k = 0; k < 3; ++k) {
      const double width = box.max[k] - box.min[k];
      const double sigma = width / std::sqrt(12.0 * n);
      CHECK(std::abs(mean[3 * g + k] - 0.5 * (box.min[k] + box.max[k])) <= 3.0 * sigma);
    }
}

TEST_CASE("best_nearest equals the brute-force full-space argmin") {
  std::mt19937_64 rng(21);
  const Aabb unit{Vec3::Zero(), Vec3::Ones()};
  int mismatches = 0;
  for (int t = 0; t < 10; ++t) {
    PlanTree tree;
    const int n = std::uniform_int_distribution<int>(1, 400)(rng);
    std::vector<FullConfig> verts;
    for (int i = 0; i < n; ++i) {
      verts.push_back(random_config(rng));
      tree.add(verts.back(), i == 0 ? -1 : 0, static_cast<double>(i));
    }
    for (int q = 0; q < 10; ++q) {
      const FullConfig query = random_config(rng);
      const std::size_t got = best_nearest(tree, query, 1e-3, 1e-6, unit);
      if (got != oracle::brute_nearest(verts, query, 1e-6)) ++mismatches;
      if (got != brute_force_nearest(tree, query, 1e-6)) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("best_nearest: single vertex, and the cheapest vertex inside delta_bn") {
  const Aabb unit{Vec3::Zero(), Vec3::Ones()};
  PlanTree one;
  one.add(FullConfig{Vec6::Constant(0.5), straight(Vec3::Zero(), Vec3::Ones())}, -1, 0.0);
  std::mt19937_64 rng(2);
  CHECK(best_nearest(one, random_config(rng), 1e-3, 1e-6, unit) == 0);

  const Band b = straight(Vec3::Zero(), Vec3(0.5, 0, 0));
  PlanTree tree;
  tree.add(FullConfig{Vec6::Constant(0.9), b}, -1, 0.0);
  tree.add(FullConfig{Vec6::Constant(0.5), b}, 0, 5.0);
  Vec6 q3 = Vec6::Constant(0.5);
  q3[0] += 4e-4;
  tree.add(FullConfig{q3, b}, 0, 3.0);
  Vec6 query = Vec6::Constant(0.5);
  query[0] -= 1e-4;  // nearer to the cost-5 vertex
  CHECK(best_nearest(tree, FullConfig{query, b}, 1e-3, 1e-6, unit) == 2);
}

TEST_CASE("connect: no-op, single step, and stopping at the last valid band") {
  const WorldGrid grid = WorldGrid::build(pillar_scene());
  const Vec3 a(0.2, -0.1, 0.1), b(0.2, 0.1, 0.1);
  const FullConfig start{pack_grippers(a, b), straight(a, b)};
  {
    const auto ctx = context(grid, 1.0);
    PlanTree tree;
    tree.add(start, -1, 0.0);
    CHECK(connect(tree, 0, start.q, ctx, 0.04).empty());
    const Vec6 target = start.q + pack_grippers(Vec3(0.02, 0, 0), Vec3(0.02, 0, 0));
    const auto created = connect(tree, 0, target, ctx, 0.04);
    REQUIRE(created.size() == 1);
    CHECK((tree.vertex(created[0]).q - target).norm() == 0.0);
    CHECK(tree.parent(created[0]) == 0);
  }
  {
    // Drag the band across the pillar: the wrap grows until it hits l_max.
    const double l_max = 0.26;
    const auto ctx = context(grid, l_max);
    const Vec3 s0(0.15, -0.1, 0.1), s1(0.15, 0.1, 0.1);
    PlanTree tree;
    tree.add(FullConfig{pack_grippers(s0, s1), straight(s0, s1)}, -1, 0.0);
    const Vec6 target = pack_grippers(Vec3(-0.25, -0.1, 0.1), Vec3(-0.25, 0.1, 0.1));
    const auto created = connect(tree, 0, target, ctx, 0.02);
    REQUIRE_FALSE(created.empty());
    const auto& last = tree.vertex(created.back());
    CHECK((last.q - target).norm() > 0.05);
    CHECK(band_length(last.band) <= l_max);
    CHECK(band_min_sdf(last.band, grid) >= 0.0);
    // The next step along the same line would break the length limit.
    const Vec6 dir = (target - last.q).normalized();
    const Vec6 next = last.q + 0.02 * dir;
    PlanTree probe;
    probe.add(last, -1, 0.0);
    CHECK(connect(probe, 0, next, ctx, 0.02).empty());
  }
}

TEST_CASE("goal_check: at goals, near a blacklisted band, gripper too far") {
  const WorldGrid grid = WorldGrid::build(pillar_scene());
  const Vec3 a(0.2, -0.1, 0.1), b(0.2, 0.1, 0.1);
  GoalSpec goal;
  goal.ee_goals = {a, b};
  goal.delta_goal = 0.02;
  const FullConfig at{pack_grippers(a, b), straight(a, b)};
  CHECK(goal_check(at, goal, grid));

  goal.blacklist.push_back(straight(a + Vec3(0.01, 0, 0), b + Vec3(0.01, 0, 0)));
  CHECK_FALSE(goal_check(at, goal, grid));

  goal.blacklist.clear();
  const FullConfig off{pack_grippers(a + Vec3(0.03, 0, 0), b), straight(a + Vec3(0.03, 0, 0), b)};
  CHECK_FALSE(goal_check(off, goal, grid));
}

TEST_CASE("rrt_eb: trivial start, goal-bias frequency, path validity around a pillar") {
  const WorldGrid grid = WorldGrid::build(pillar_scene());
  PlannerParams params;
  params.step = 0.04;
  const Vec3 a(0.2, -0.1, 0.1), b(0.2, 0.1, 0.1);
  const FullConfig start{pack_grippers(a, b), straight(a, b)};
  const auto ctx = context(grid, 0.3);
  {
    GoalSpec goal;
    goal.ee_goals = {a, b};
    goal.goal_configs = {start.q};
    Rng rng(0);
    const auto r = rrt_eb(start, goal, params, ctx, rng);
    CHECK(r.success);
    CHECK(r.path.size() == 1);
  }
  {
    // An unreachable goal (inside the pillar's footprint band-wise: blacklisted
    // everything) lets us count goal-bias attempts over a fixed sample budget.
    GoalSpec goal;
    goal.ee_goals = {Vec3(10, 10, 10), Vec3(10, 10, 10)};
    goal.goal_configs = {pack_grippers(Vec3(-0.2, -0.1, 0.1), Vec3(-0.2, 0.1, 0.1))};
    PlannerParams p = params;
    p.max_samples = 10000;
    p.time_budget = 1e9;
    p.restart_timeout = 1e9;
    Rng rng(4);
    const auto r = rrt_eb(start, goal, p, ctx, rng);
    CHECK_FALSE(r.success);
    const double n = static_cast<double>(r.stats.iterations);
    const double sigma = std::sqrt(n * 0.1 * 0.9);
    CHECK(std::abs(static_cast<double>(r.stats.goal_bias_attempts) - 0.1 * n) <= 3.0 * sigma);
  }
  {
    GoalSpec goal;
    const Vec3 ga(-0.2, -0.1, 0.1), gb(-0.2, 0.1, 0.1);
    goal.ee_goals = {ga, gb};
    goal.goal_configs = {pack_grippers(ga, gb)};
    Rng rng(1);
    const auto r = rrt_eb(start, goal, params, ctx, rng);
    REQUIRE(r.success);
    REQUIRE(r.path.size() == r.bands.size());
    CHECK((r.path.front() - start.q).norm() == 0.0);
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      CHECK(grippers_free(r.path[k], ctx));
      CHECK(band_valid(r.bands[k], ctx));
      if (k > 0) CHECK((r.path[k] - r.path[k - 1]).norm() <= params.step + 1e-12);
    }
    CHECK(goal_check(FullConfig{r.path.back(), r.bands.back()}, goal, grid));

    // Same seed, same plan.
    Rng again(1);
    const auto r2 = rrt_eb(start, goal, params, ctx, again);
    REQUIRE(r2.path.size() == r.path.size());
    for (std::size_t k = 0; k < r.path.size(); ++k) CHECK((r2.path[k] - r.path[k]).norm() == 0.0);
    CHECK(r2.stats.vertices == r.stats.vertices);
  }
}

TEST_CASE("shortcut smoothing: straight path kept, zig-zag straightened") {
  Scene s;
  s.bounds = {Vec3(-0.5, -0.5, 0.0), Vec3(0.5, 0.5, 0.2)};
  s.resolution = 0.02;
  const WorldGrid grid = WorldGrid::build(s);
  const auto ctx = context(grid, 1.0);
  PlannerParams params;
  params.step = 0.04;
  const Vec3 off(0, 0.1, 0);

  auto run = [&](std::vector<Vec6> path, std::uint64_t seed) {
    std::vector<Band> bands{straight(gripper(path[0], 0), gripper(path[0], 1))};
    for (std::size_t k = 1; k < path.size(); ++k) {
      bands.push_back(forward_propagate(bands.back(), gripper(path[k], 0), gripper(path[k], 1), grid, ctx.band));
    }
    GoalSpec goal;
    goal.ee_goals = {gripper(path.back(), 0), gripper(path.back(), 1)};
    Rng rng(seed);
    shortcut_smooth(path, bands, goal, params, ctx, rng);
    CHECK(path.size() == bands.size());
    CHECK(goal_check(FullConfig{path.back(), bands.back()}, goal, grid));
    return path;
  };

  std::vector<Vec6> line;
  for (int k = 0; k <= 10; ++k) {
    const Vec3 p(-0.3 + 0.06 * k, 0, 0.1);
    line.push_back(pack_grippers(p, p + off));
  }
  const auto kept = run(line, 3);
  CHECK(path_length(kept) == doctest::Approx(path_length(line)).epsilon(1e-12));

  std::vector<Vec6> zig;
  for (int k = 0; k <= 12; ++k) {
    const Vec3 p(-0.3 + 0.05 * k, (k % 2 ? 0.15 : -0.15), 0.1);
    zig.push_back(pack_grippers(p, p + off));
  }
  const double straight_len = (zig.back() - zig.front()).norm();
  const auto smooth = run(zig, 5);
  CHECK(path_length(smooth) <= straight_len * 1.05);
  CHECK(path_length(smooth) >= straight_len - 1e-12);
}

TEST_CASE("two_means reaches the exhaustive optimum on small point sets") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Vec3> pts;
    const int n = std::uniform_int_distribution<int>(2, 12)(rng);
    for (int k = 0; k < n; ++k) pts.emplace_back(u(rng), u(rng), 0.3 * u(rng));
    const auto km = two_means(pts, 10);
    CHECK(km.inertia <= oracle::exhaustive_two_means_cost(pts) * (1.0 + 1e-9) + 1e-12);
  }
}

TEST_CASE("make_goal: clusters along one table edge, both free; empty target set is an error") {
  Scene s;
  s.bounds = {Vec3(-0.5, -0.5, 0.0), Vec3(0.5, 0.5, 0.3)};
  s.resolution = 0.02;
  s.obstacles.push_back(Box{Vec3(0, 0, 0.05), Vec3(0.3, 0.3, 0.05)});  // table
  const WorldGrid grid = WorldGrid::build(s);
  const auto ctx = context(grid, 1.0);
  std::vector<Vec3> edge;
  for (int k = 0; k < 10; ++k) edge.emplace_back(-0.25 + 0.05 * k, 0.3, 0.1);
  PlannerParams params;
  Rng rng(0);
  const auto goal = make_goal(edge, pack_grippers(Vec3(-0.3, 0.4, 0.2), Vec3(0.3, 0.4, 0.2)), {}, params, ctx, rng);
  const auto km = two_means(edge, params.kmeans_restarts);
  for (int g = 0; g < 2; ++g) {
    CHECK(grid.sdf(goal.ee_goals[g]) >= ctx.gripper_radius);
    CHECK(std::abs(goal.ee_goals[g].x() - km.centers[g].x()) < 0.1);
  }
  CHECK(goal.ee_goals[0].x() < goal.ee_goals[1].x());  // nearer gripper takes each cluster
  CHECK_THROWS_AS(make_goal({}, Vec6::Zero(), {}, params, ctx, rng), TaskComplete);
}

TEST_CASE("planner parameters are validated") {
  PlannerParams p;
  p.gamma_gb = 1.5;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("planner.gamma_gb"), ConfigError);
}
