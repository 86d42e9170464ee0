#include "bandplan/simulator.hpp"

#include <doctest.h>

#include <cmath>

using namespace bandplan;

namespace {

WorldGrid free_grid() {
  Scene s;
  s.bounds = {Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  s.resolution = 0.05;
  return WorldGrid::build(s);
}

double max_displacement(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, (a[i] - b[i]).norm());
  return worst;
}

}  // namespace

TEST_CASE("rope construction: node count, geodesic, rest distances") {
  const DeformConfig rope = make_rope(39, 0.78, Vec3::Zero(), Vec3::UnitX());
  CHECK(rope.size() == 39);
  CHECK(rope.topology == Topology::Rope);
  CHECK(geodesic_between_grippers(rope) == doctest::Approx(0.78).epsilon(1e-12));
  CHECK(rope.rest_distances(0, 38) == doctest::Approx(0.78));
  CHECK(rope.rest_distances(3, 3) == 0.0);
  CHECK(rope.rest_distances(4, 9) == rope.rest_distances(9, 4));
  CHECK(rope.grasped[0] == std::vector<std::size_t>{0});
  CHECK(rope.grasped[1] == std::vector<std::size_t>{38});
  const auto path = geodesic_node_path(rope);
  CHECK(path.size() == 39);
  CHECK(path.front() == 0);
  CHECK(path.back() == 38);
}

TEST_CASE("cloth construction: grid indexing and grasp geodesic along the short side") {
  const DeformConfig small = make_cloth(3, 3, 0.1, 0.1, Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), {{{0}, {2}}});
  CHECK(small.size() == 9);

  const DeformConfig cloth =
      make_cloth(25, 15, 0.3, 0.5, Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), {{{0}, {14}}});
  CHECK(cloth.size() == 375);
  // Node (r, c) = origin + c * dx * u + r * dy * v.
  CHECK((cloth.points[2 * 15 + 4] - Vec3(4 * 0.3 / 14, 2 * 0.5 / 24, 0)).norm() < 1e-12);
  const double cell = 0.3 / 14;
  CHECK(std::abs(geodesic_between_grippers(cloth) - 0.3) <= cell);
  CHECK(grasp_centroid(cloth, 1).x() == doctest::Approx(0.3));
}

TEST_CASE("both grippers on the same node: zero geodesic") {
  DeformConfig rope = make_rope(5, 0.4, Vec3::Zero(), Vec3::UnitX());
  rope.grasped = {{{2}, {2}}};
  CHECK(geodesic_between_grippers(rope) == 0.0);
}

TEST_CASE("pairwise and graph distances agree for a straight rope") {
  const DeformConfig rope = make_rope(6, 0.5, Vec3(0.1, 0.2, 0.3), Vec3(1, 1, 0));
  const auto d = pairwise_distances(rope.points);
  const std::vector<std::size_t> src{0};
  const auto g = graph_distances(rope, src);
  for (std::size_t i = 0; i < rope.size(); ++i) CHECK(g[i] == doctest::Approx(d(0, static_cast<Eigen::Index>(i))));
}

TEST_CASE("disconnected grasp sets are a model error") {
  DeformConfig rope = make_rope(4, 0.3, Vec3::Zero(), Vec3::UnitX());
  rope.edges.erase(rope.edges.begin() + 1);  // cut between nodes 1 and 2
  CHECK_THROWS_AS(geodesic_node_path(rope), ModelError);
  const WorldGrid grid = free_grid();
  CHECK_THROWS_AS(Simulator(rope, grid, SimParams{}), ModelError);
}

TEST_CASE("simulator: zero command leaves a relaxed object unchanged") {
  const WorldGrid grid = free_grid();
  const DeformConfig rope = make_rope(20, 0.4, Vec3(-0.2, 0, 0), Vec3::UnitX());
  const Simulator sim(rope, grid, SimParams{});
  const SimState s0 = sim.initial_state(rope);
  const SimState s1 = sim.step(s0, Vec6::Zero());
  CHECK(max_displacement(s0.deform.points, s1.deform.points) <= sim.params().settle_tol);
  CHECK(s1.deform.size() == 20);
  CHECK((s1.grippers - s0.grippers).norm() == 0.0);
}

TEST_CASE("simulator: translating both grippers transports a relaxed rope rigidly") {
  const WorldGrid grid = free_grid();
  const DeformConfig rope = make_rope(20, 0.4, Vec3(-0.2, 0, 0), Vec3::UnitX());
  SimParams params;
  params.iterations = 4;
  const Simulator sim(rope, grid, params);
  SimState s = sim.initial_state(rope);
  const auto start = s.deform.points;
  const Vec3 total(0.1, 0, 0);
  const int steps = 10;
  const Vec3 v = total / (steps * params.dt);
  for (int k = 0; k < steps; ++k) sim.advance(s, pack_grippers(v, v));
  for (std::size_t i = 0; i < start.size(); ++i) {
    CHECK((s.deform.points[i] - (start[i] + total)).norm() <= params.settle_tol);
  }
}

TEST_CASE("simulator: grippers pulled past lambda_s report a stretch ratio of at least lambda_s") {
  // 3-node chain with rest length 0.2; the grasped ends are rigid, so the
  // two edges together must span the gripper separation.
  const WorldGrid grid = free_grid();
  const DeformConfig chain = make_rope(3, 0.2, Vec3::Zero(), Vec3::UnitX());
  SimParams params;
  const Simulator sim(chain, grid, params);
  SimState s = sim.initial_state(chain);
  const double lambda_s = 1.15;
  const double target_sep = 1.2 * 0.2;
  const Vec3 pull((target_sep - 0.2) / params.dt, 0, 0);
  sim.advance(s, pack_grippers(Vec3::Zero(), pull));
  const double sep = (gripper(s.grippers, 1) - gripper(s.grippers, 0)).norm();
  CHECK(sep == doctest::Approx(target_sep));
  // Oracle: the longer of two edges spanning `sep` is at least sep / 2.
  CHECK(s.max_stretch >= (sep / 2.0) / 0.1 - 1e-12);
  CHECK(s.max_stretch >= lambda_s);
}

TEST_CASE("simulator: nodes stay out of obstacles and the gripper target is clipped") {
  Scene scene;
  scene.bounds = {Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)};
  scene.resolution = 0.02;
  scene.obstacles.push_back(Box{Vec3(0, 0.15, 0), Vec3(0.3, 0.05, 0.3)});
  const WorldGrid grid = WorldGrid::build(scene);
  const DeformConfig rope = make_rope(15, 0.3, Vec3(-0.15, 0, 0), Vec3::UnitX());
  SimParams params;
  params.node_clearance = 0.01;
  const Simulator sim(rope, grid, params);
  SimState s = sim.initial_state(rope);
  for (int k = 0; k < 20; ++k) sim.advance(s, pack_grippers(Vec3(0, 0.5, 0), Vec3(0, 0.5, 0)));
  CHECK(s.gripper_clipped);
  for (int g = 0; g < 2; ++g) CHECK(grid.sdf(gripper(s.grippers, g)) >= params.gripper_radius - 1e-9);
  for (std::size_t i = 0; i < s.deform.size(); ++i) CHECK(grid.sdf(s.deform.points[i]) >= -1e-9);
}

TEST_CASE("simulator: compression limit keeps mesh edges from collapsing") {
  const WorldGrid grid = free_grid();
  const DeformConfig rope = make_rope(11, 0.5, Vec3(-0.25, 0, 0), Vec3::UnitX());
  SimParams params;
  params.compression_limit = 0.7;
  const Simulator sim(rope, grid, params);
  SimState s = sim.initial_state(rope);
  // Push the ends 0.1 closer: the chain must shorten every edge toward 0.04.
  const Vec3 v(0.05 / (10 * params.dt), 0, 0);
  for (int k = 0; k < 10; ++k) sim.advance(s, pack_grippers(v, -v));
  const double rest = 0.05;
  double shortest = 1.0;
  for (std::size_t i = 0; i + 1 < s.deform.size(); ++i) {
    shortest = std::min(shortest, (s.deform.points[i + 1] - s.deform.points[i]).norm());
  }
  CHECK(shortest >= params.compression_limit * rest - 2 * params.settle_tol);
}

TEST_CASE("simulator parameters are validated") {
  SimParams p;
  p.compression_limit = 1.0;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("compression_limit"), ConfigError);
  p = SimParams{};
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
