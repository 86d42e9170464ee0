#include "band_scenes.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bandplan;

namespace {

WorldGrid empty_grid(double res = 0.02) {
  Scene s;
  s.bounds = {Vec3(-0.8, -0.8, -0.1), Vec3(0.8, 0.8, 0.1)};
  s.resolution = res;
  return WorldGrid::build(s);
}

/// Signed winding angle of the band around the vertical axis through c.
double winding(const Band& b, const Eigen::Vector2d& c) {
  double total = 0.0;
  for (std::size_t i = 1; i < b.size(); ++i) {
    const Eigen::Vector2d p(b.points[i - 1].x() - c.x(), b.points[i - 1].y() - c.y());
    const Eigen::Vector2d q(b.points[i].x() - c.x(), b.points[i].y() - c.y());
    total += std::atan2(p.x() * q.y() - p.y() * q.x(), p.dot(q));
  }
  return total;
}

}  // namespace

TEST_CASE("band_length") {
  CHECK(band_length(Band{{Vec3::Zero(), Vec3(1, 0, 0)}}) == doctest::Approx(1.0));
  CHECK(band_length(Band{{Vec3::Zero(), Vec3(0.5, 0, 0), Vec3(1, 0, 0)}}) == doctest::Approx(1.0));
  CHECK(band_length(Band{{Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)}}) ==
        doctest::Approx(4.0));
}

TEST_CASE("resample and interpolate_points") {
  const std::vector<Vec3> pts{Vec3::Zero(), Vec3(1, 0, 0), Vec3(1, 1, 0)};
  const auto r = resample(pts, 5);
  REQUIRE(r.size() == 5);
  CHECK((r[2] - Vec3(1, 0, 0)).norm() == doctest::Approx(0.0));
  CHECK((r[1] - Vec3(0.5, 0, 0)).norm() == doctest::Approx(0.0));
  const auto ip = interpolate_points(pts, 0.3);
  for (std::size_t i = 1; i < ip.size(); ++i) CHECK((ip[i] - ip[i - 1]).norm() <= 0.3 + 1e-12);
  CHECK(band_length(ip) == doctest::Approx(2.0));
}

TEST_CASE("overstretched") {
  const Band unit{{Vec3::Zero(), Vec3(1, 0, 0)}};
  CHECK_FALSE(overstretched(unit, 1.15));
  CHECK_FALSE(overstretched(unit, 1.0));
  CHECK(overstretched(Band{{Vec3::Zero(), Vec3(1.2, 0, 0)}}, 1.15));
}

TEST_CASE("band_distance: identity, translation closed form, symmetry") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.2);
  auto random_band = [&] {
    Band b;
    const int k = 2 + static_cast<int>(rng() % 20);
    for (int i = 0; i < k; ++i) b.points.emplace_back(n(rng), n(rng), n(rng));
    return b;
  };
  for (int i = 0; i < 100; ++i) {
    const Band a = random_band();
    const Band b = random_band();
    CHECK(band_distance(a, a) == 0.0);
    CHECK(band_distance(a, b) == band_distance(b, a));
    Band t = a;
    for (auto& p : t.points) p += Vec3(1, 0, 0);
    CHECK(band_distance(a, t) == doctest::Approx(std::sqrt(static_cast<double>(kMaxBandPoints))).epsilon(1e-9));
  }
}

TEST_CASE("pull_tight: straight band unchanged, semicircle collapses to the chord") {
  const WorldGrid g = empty_grid();
  const BandParams params = BandParams::for_grid(g);
  const Band straight{interpolate_points(std::vector<Vec3>{Vec3(-0.5, 0, 0), Vec3(0.5, 0, 0)}, 0.02)};
  const Band st = pull_tight(straight, g, params);
  CHECK(band_length(st) == doctest::Approx(1.0).epsilon(1e-9));

  Band semi;
  for (int i = 0; i <= 200; ++i) {
    const double t = std::numbers::pi * (1.0 - i / 200.0);
    semi.points.emplace_back(0.5 * std::cos(t), 0.5 * std::sin(t), 0.0);
  }
  const Band tight = pull_tight(semi, g, params);
  CHECK(std::abs(band_length(tight) - 1.0) <= 0.01);
  CHECK((tight.front() - semi.front()).norm() == 0.0);
  CHECK((tight.back() - semi.back()).norm() == 0.0);
}

TEST_CASE("pull_tight matches the taut-string length on pillar and corner scenes") {
  for (const auto& t : scenes::taut_scenes()) {
    CAPTURE(t.name);
    const WorldGrid g = WorldGrid::build(t.scene);
    const BandParams params = BandParams::for_grid(g);
    const Band start = scenes::initial_band(t);
    const Band tight = pull_tight(start, g, params);
    const double ref = scenes::reference_length(t);
    CHECK(std::abs(band_length(tight) - ref) / ref <= 0.02);
    CHECK(band_length(tight) <= band_length(start));
    CHECK(band_min_sdf(tight, g) >= 0.0);
  }
}

TEST_CASE("pull_tight never lengthens a band (random bands around a pillar)") {
  const auto scene = scenes::taut_scenes().front();
  const WorldGrid g = WorldGrid::build(scene.scene);
  const BandParams params = BandParams::for_grid(g);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  int violations = 0;
  for (int i = 0; i < 30; ++i) {
    std::vector<Vec3> pts;
    for (int k = 0; k < 6; ++k) {
      Vec3 p(u(rng), u(rng), scenes::kPlaneZ);
      if (g.sdf(p) < 0.0) p = g.project_out_of_collision(p, 0.0);
      pts.push_back(p);
    }
    std::vector<Vec3> dense;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      if (!g.segment_collision_free(pts[k], pts[k + 1], 0.0)) continue;
      if (dense.empty()) dense.push_back(pts[k]);
      dense.push_back(pts[k + 1]);
    }
    if (dense.size() < 2) continue;
    const Band b{interpolate_points(dense, params.max_segment_length)};
    if (band_length(pull_tight(b, g, params)) > band_length(b) + 1e-12) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("forward_propagate") {
  const auto scene = scenes::taut_scenes().front();  // pillar r = 0.06 at the origin
  const WorldGrid g = WorldGrid::build(scene.scene);
  const BandParams params = BandParams::for_grid(g);
  const double z = scenes::kPlaneZ;

  SUBCASE("unchanged endpoints: fixed point up to the tightening tolerance") {
    const Band b{interpolate_points(std::vector<Vec3>{Vec3(-0.3, 0.15, z), Vec3(0.3, 0.15, z)}, params.max_segment_length)};
    const Band f = forward_propagate(b, b.front(), b.back(), g, params);
    CHECK(std::abs(band_length(f) - band_length(b)) <= 1e-6);
  }

  SUBCASE("dragging the endpoints below the pillar wraps it; the result matches the taut string") {
    Band b{interpolate_points(std::vector<Vec3>{Vec3(-0.3, 0.15, z), Vec3(0.3, 0.15, z)}, params.max_segment_length)};
    for (double y = 0.15; y > -1e-9; y -= 0.005) {
      b = forward_propagate(b, Vec3(-0.3, y, z), Vec3(0.3, y, z), g, params);
      CHECK(band_min_sdf(b, g) >= 0.0);
      CHECK((b.front() - Vec3(-0.3, y, z)).norm() == 0.0);
      CHECK((b.back() - Vec3(0.3, y, z)).norm() == 0.0);
    }
    const double ref = oracle::taut_around_disc({-0.3, 0.0}, {0.3, 0.0}, {0.0, 0.0}, 0.06 + params.clearance);
    CHECK(std::abs(band_length(b) - ref) / ref <= 0.02);
    // Still on the +y side: it never crossed the pillar.
    CHECK(winding(b, {0.0, 0.0}) < -1.0);

    SUBCASE("raising the endpoints past the pillar edge snaps the band straight") {
      for (double y = 0.005; y <= 0.1 + 1e-9; y += 0.005) {
        b = forward_propagate(b, Vec3(-0.3, y, z), Vec3(0.3, y, z), g, params);
      }
      CHECK(std::abs(band_length(b) - 0.6) / 0.6 <= 0.01);
    }
  }

  SUBCASE("endpoint inside an obstacle is rejected") {
    const Band b{{Vec3(-0.3, 0.15, z), Vec3(0.3, 0.15, z)}};
    CHECK_THROWS_AS(forward_propagate(b, Vec3(0, 0, z), Vec3(0.3, 0.15, z), g, params), InvalidGripperTarget);
  }
}

TEST_CASE("initialize_band from objects") {
  const WorldGrid g = empty_grid();
  const BandParams params = BandParams::for_grid(g);
  SUBCASE("straight relaxed rope") {
    const DeformConfig rope = make_rope(39, 0.78, Vec3(-0.39, 0, 0), Vec3::UnitX());
    CHECK(std::abs(band_length(initialize_band(rope, g, params)) - 0.78) <= 0.01 * 0.78);
  }
  SUBCASE("cloth grasped at two adjacent corners") {
    const DeformConfig cloth = make_cloth(25, 15, 0.3, 0.5, Vec3(-0.15, -0.25, 0), Vec3::UnitX(), Vec3::UnitY(),
                                          {std::vector<std::size_t>{0}, std::vector<std::size_t>{14}});
    CHECK(std::abs(band_length(initialize_band(cloth, g, params)) - 0.3) <= 0.3 / 14);
  }
  SUBCASE("rope folded in half with coincident endpoints") {
    DeformConfig rope = make_rope(39, 0.78, Vec3(-0.39, 0, 0), Vec3::UnitX());
    // Fold about the middle node: the second half comes back 1 cm above the first.
    for (int i = 20; i < 39; ++i) {
      const double s = 0.78 * i / 38.0;
      rope.points[i] = Vec3(-0.39 + (0.78 - s), 0.0, 0.0);
    }
    rope.points[38] = rope.points[0];
    CHECK(band_length(initialize_band(rope, g, params)) <= 0.02);
  }
  SUBCASE("disconnected grasp sets are a model error") {
    DeformConfig rope = make_rope(5, 0.4, Vec3::Zero(), Vec3::UnitX());
    rope.edges.erase(rope.edges.begin() + 2);
    CHECK_THROWS_AS(initialize_band(rope, g, params), ModelError);
  }
}

TEST_CASE("vis_check") {
  const auto scene = scenes::taut_scenes().front();
  const WorldGrid g = WorldGrid::build(scene.scene);
  const BandParams params = BandParams::for_grid(g);
  const double z = scenes::kPlaneZ;
  const Band above{interpolate_points(std::vector<Vec3>{Vec3(-0.3, 0.0, z), Vec3(0, 0.15, z), Vec3(0.3, 0.0, z)},
                                      params.max_segment_length)};
  const Band below{interpolate_points(std::vector<Vec3>{Vec3(-0.3, 0.0, z), Vec3(0, -0.15, z), Vec3(0.3, 0.0, z)},
                                      params.max_segment_length)};
  CHECK(vis_check(above, Blacklist{}, g) == 0);
  CHECK(vis_check(above, Blacklist{above}, g) == 1);
  CHECK(vis_check(above, Blacklist{below}, g) == 0);
  // Rung-by-rung oracle for the opposite-side pair: the middle rung crosses the pillar.
  const auto ra = resample(above.points, std::max(above.size(), below.size()));
  const auto rb = resample(below.points, std::max(above.size(), below.size()));
  bool all_clear = true;
  for (std::size_t i = 0; i < ra.size(); ++i) all_clear = all_clear && g.segment_collision_free(ra[i], rb[i], 0.0);
  CHECK_FALSE(all_clear);
  // A slightly shifted band on the same side is similar.
  Band above2 = above;
  for (auto& p : above2.points) p.y() += 0.02;
  above2.points.front().y() -= 0.02;
  above2.points.back().y() -= 0.02;
  CHECK(vis_check(above2, Blacklist{below, above}, g) == 1);
}

TEST_CASE("metric axioms of band_distance on random pairs") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_band = [&] {
    Band b;
    const int k = 2 + static_cast<int>(rng() % 6);
    for (int i = 0; i < k; ++i) b.points.emplace_back(u(rng), u(rng), u(rng));
    return b;
  };
  int violations = 0;
  for (int i = 0; i < 500; ++i) {
    const Band a = random_band(), b = random_band(), c = random_band();
    const double ab = band_distance(a, b), bc = band_distance(b, c), ac = band_distance(a, c);
    if (ab < 0.0 || band_distance(a, a) != 0.0 || ab != band_distance(b, a)) ++violations;
    if (ac > ab + bc + 1e-9) ++violations;
  }
  CHECK(violations == 0);
}
