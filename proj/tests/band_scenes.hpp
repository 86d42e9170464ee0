#pragma once
// Planar pillar / corner scenes with an analytic taut-string reference length.
// Obstacles are extruded along z; the band lives in the plane z = kPlaneZ.

#include "oracles.hpp"

#include <string>
#include <vector>

namespace scenes {

using bandplan::Vec3;

inline constexpr double kPlaneZ = 0.05;
inline constexpr double kRes = 0.01;

struct TautScene {
  std::string name;
  bandplan::Scene scene;
  Eigen::Vector2d a, b;
  double via_y;  // initial band detours through (mid-x, via_y) on the +y side
  std::vector<Eigen::Vector2d> dilated_samples;  // obstacles grown by the band clearance
};

inline bandplan::Scene base_scene() {
  bandplan::Scene s;
  s.bounds = {Vec3(-0.4, -0.3, 0.0), Vec3(0.4, 0.3, 0.1)};
  s.resolution = kRes;
  return s;
}

inline void add_cylinder(TautScene& t, Eigen::Vector2d c, double r, double clearance) {
  t.scene.obstacles.push_back(bandplan::Cylinder{Vec3(c.x(), c.y(), kPlaneZ), r, 0.5});
  const auto s = oracle::dilated_disc(c, r, clearance);
  t.dilated_samples.insert(t.dilated_samples.end(), s.begin(), s.end());
}

inline void add_box(TautScene& t, Eigen::Vector2d c, Eigen::Vector2d half, double clearance) {
  t.scene.obstacles.push_back(bandplan::Box{Vec3(c.x(), c.y(), kPlaneZ), Vec3(half.x(), half.y(), 0.5)});
  const auto s = oracle::dilated_rect(c, half, clearance);
  t.dilated_samples.insert(t.dilated_samples.end(), s.begin(), s.end());
}

/// Five scenes: a centred pillar, an off-centre pillar, a single box corner,
/// a box whose two top corners are wrapped, and a box plus pillar together.
inline std::vector<TautScene> taut_scenes() {
  const double c = kRes / 2.0;  // band clearance
  std::vector<TautScene> out;
  {
    TautScene t{"pillar", base_scene(), {-0.3, 0.0}, {0.3, 0.0}, 0.2, {}};
    add_cylinder(t, {0.0, 0.0}, 0.06, c);
    out.push_back(t);
  }
  {
    TautScene t{"offset_pillar", base_scene(), {-0.35, -0.02}, {0.2, 0.05}, 0.22, {}};
    add_cylinder(t, {-0.05, 0.03}, 0.05, c);
    out.push_back(t);
  }
  {
    TautScene t{"box_corner", base_scene(), {-0.3, -0.1}, {0.3, 0.12}, 0.25, {}};
    add_box(t, {0.0, -0.05}, {0.1, 0.08}, c);
    out.push_back(t);
  }
  {
    TautScene t{"box_two_corners", base_scene(), {-0.3, 0.0}, {0.3, 0.0}, 0.2, {}};
    add_box(t, {0.0, 0.0}, {0.12, 0.05}, c);
    out.push_back(t);
  }
  {
    TautScene t{"box_and_pillar", base_scene(), {-0.35, 0.0}, {0.35, 0.0}, 0.22, {}};
    add_box(t, {-0.12, 0.0}, {0.05, 0.05}, c);
    add_cylinder(t, {0.12, 0.03}, 0.04, c);
    out.push_back(t);
  }
  return out;
}

/// Band a -> (mid, via_y) -> b, densely interpolated, lying on the +y side.
inline bandplan::Band initial_band(const TautScene& t) {
  const Vec3 a(t.a.x(), t.a.y(), kPlaneZ), b(t.b.x(), t.b.y(), kPlaneZ);
  const Vec3 m(0.5 * (t.a.x() + t.b.x()), t.via_y, kPlaneZ);
  std::vector<Vec3> pts{a, Vec3(a.x(), t.via_y, kPlaneZ), m, Vec3(b.x(), t.via_y, kPlaneZ), b};
  return bandplan::Band{bandplan::interpolate_points(pts, kRes)};
}

inline double reference_length(const TautScene& t) {
  // The band runs above (+y side of) every obstacle; for a -> b with a left of
  // b that is the left-hand side.
  return oracle::taut_hull_chain(t.a, t.b, t.dilated_samples, +1.0);
}

}  // namespace scenes
