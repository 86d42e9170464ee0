#include "bandplan/band.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace bandplan {

BandParams BandParams::for_grid(const WorldGrid& grid) {
  BandParams p;
  p.max_segment_length = grid.resolution();
  p.clearance = 0.5 * grid.resolution();
  return p;
}

double band_length(std::span<const Vec3> points) {
  double len = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) len += (points[i] - points[i - 1]).norm();
  return len;
}

double band_length(const Band& band) { return band_length(std::span<const Vec3>(band.points)); }

std::vector<Vec3> resample(std::span<const Vec3> points, std::size_t n) {
  std::vector<Vec3> out;
  out.reserve(n);
  if (points.empty()) return out;
  if (points.size() == 1 || n < 2) {
    out.assign(std::max<std::size_t>(n, 1), points.front());
    return out;
  }
  std::vector<double> cum(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) cum[i] = cum[i - 1] + (points[i] - points[i - 1]).norm();
  const double total = cum.back();
  if (total <= 0.0) {
    out.assign(n, points.front());
    return out;
  }
  std::size_t seg = 1;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg + 1 < points.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double t = len > 0.0 ? std::clamp((s - cum[seg - 1]) / len, 0.0, 1.0) : 0.0;
    out.push_back(points[seg - 1] + t * (points[seg] - points[seg - 1]));
  }
  out.front() = points.front();
  out.back() = points.back();
  return out;
}

std::vector<Vec3> interpolate_points(std::span<const Vec3> points, double max_len) {
  std::vector<Vec3> out;
  if (points.empty()) return out;
  out.push_back(points.front());
  for (std::size_t i = 1; i < points.size(); ++i) {
    const Vec3 a = points[i - 1];
    const Vec3 b = points[i];
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / max_len - 1e-9)));
    for (int k = 1; k < pieces; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / pieces));
    out.push_back(b);
  }
  return out;
}

std::vector<Vec3> remove_extra_points(std::span<const Vec3> points, const WorldGrid& grid, double clearance) {
  if (points.size() <= 2) return {points.begin(), points.end()};
  std::vector<Vec3> out;
  out.push_back(points.front());
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    if (!grid.segment_collision_free(out.back(), points[i + 1], clearance)) out.push_back(points[i]);
  }
  out.push_back(points.back());
  return out;
}

namespace {

/// A few gradient steps toward sdf >= clearance; nullopt when they do not get
/// there (the caller then rejects the move instead of jumping far away).
std::optional<Vec3> local_project(const WorldGrid& grid, Vec3 p, double clearance) {
  for (int k = 0; k < 8; ++k) {
    const double s = grid.sdf(p);
    if (s >= clearance) return p;
    const Vec3 g = grid.sdf_gradient(p);
    const double n = g.norm();
    if (n < 1e-9) return std::nullopt;
    p += g / n * (clearance - s + 1e-7);
  }
  if (grid.sdf(p) >= clearance) return p;
  return std::nullopt;
}

/// Restores the max-segment-length invariant; inserted points that fall
/// inside an obstacle (possible only between collision-check samples) are
/// pushed back out.
std::vector<Vec3> finalize(std::span<const Vec3> points, const WorldGrid& grid, const BandParams& params) {
  std::vector<Vec3> out = interpolate_points(points, params.max_segment_length);
  for (std::size_t i = 1; i + 1 < out.size(); ++i) {
    if (grid.sdf(out[i]) < 0.0) {
      if (auto q = local_project(grid, out[i], params.clearance)) out[i] = *q;
    }
  }
  if (out.size() > params.max_points) out = resample(out, params.max_points);
  return out;
}

}  // namespace

Band pull_tight(const Band& band, const WorldGrid& grid, const BandParams& params) {
  if (band.size() <= 2) return Band{finalize(band.points, grid, params)};
  const double c = params.clearance;
  std::vector<Vec3> pts = remove_extra_points(band.points, grid, c);
  double length = band_length(pts);
  for (int iter = 0; iter < params.max_iters && pts.size() > 2; ++iter) {
    // Densify so points can slide around obstacles, contract every interior
    // point toward its neighbours' midpoint (Gauss-Seidel), then shortcut
    // whatever became visible.
    pts = interpolate_points(pts, params.max_segment_length);
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      const Vec3& prev = pts[i - 1];
      const Vec3& next = pts[i + 1];
      Vec3 d = 0.5 * (prev + next) - pts[i];
      const double dn = d.norm();
      if (dn < 1e-12) continue;
      if (dn > c) d *= c / dn;
      auto cand = local_project(grid, pts[i] + d, c);
      if (!cand) continue;
      const double old_local = (pts[i] - prev).norm() + (next - pts[i]).norm();
      const double new_local = (*cand - prev).norm() + (next - *cand).norm();
      if (new_local >= old_local - 1e-12) continue;
      if ((*cand - pts[i]).norm() > 2.0 * c) continue;
      if (!grid.segment_collision_free(prev, *cand, 0.0) || !grid.segment_collision_free(*cand, next, 0.0)) {
        continue;
      }
      pts[i] = *cand;
    }
    pts = remove_extra_points(pts, grid, c);
    const double new_length = band_length(pts);
    const bool converged = length - new_length < params.tighten_tol;
    length = new_length;
    if (converged) break;
  }
  Band out{finalize(pts, grid, params)};
  // Projection of inserted points can only lengthen the band marginally; the
  // contraction itself is monotone. Keep the guarantee exact.
  if (band_length(out) > band_length(band)) return band;
  return out;
}

Band forward_propagate(const Band& band, const Vec3& p0, const Vec3& p1, const WorldGrid& grid,
                       const BandParams& params) {
  if (grid.sdf(p0) < 0.0 || grid.sdf(p1) < 0.0) {
    throw InvalidGripperTarget("invalid gripper target: band endpoint inside an obstacle");
  }
  std::vector<Vec3> pts;
  pts.reserve(band.size() + 2);
  pts.push_back(p0);
  pts.insert(pts.end(), band.points.begin(), band.points.end());
  pts.push_back(p1);
  pts = interpolate_points(pts, params.max_segment_length);
  pts = remove_extra_points(pts, grid, params.clearance);
  Band out = pull_tight(Band{std::move(pts)}, grid, params);
  out.points.front() = p0;
  out.points.back() = p1;
  return out;
}

Band initialize_band(const DeformConfig& deform, const Vec3& g0, const Vec3& g1, const WorldGrid& grid,
                     const BandParams& params) {
  const auto chain = geodesic_node_path(deform);
  std::vector<Vec3> pts;
  pts.push_back(g0);
  for (std::size_t idx : chain) {
    const Vec3& p = deform.points[idx];
    if ((p - pts.back()).norm() > 1e-12) pts.push_back(p);
  }
  if ((g1 - pts.back()).norm() > 1e-12 || pts.size() == 1) pts.push_back(g1);
  else pts.back() = g1;
  Band band{interpolate_points(pts, params.max_segment_length)};
  for (std::size_t i = 1; i + 1 < band.size(); ++i) {
    if (grid.sdf(band.points[i]) < 0.0) band.points[i] = grid.project_out_of_collision(band.points[i], params.clearance);
  }
  return pull_tight(band, grid, params);
}

Band initialize_band(const DeformConfig& deform, const WorldGrid& grid, const BandParams& params) {
  return initialize_band(deform, grasp_centroid(deform, 0), grasp_centroid(deform, 1), grid, params);
}

Eigen::VectorXd upsample_flat(const Band& band) {
  const auto pts = resample(band.points, kMaxBandPoints);
  Eigen::VectorXd v(3 * kMaxBandPoints);
  for (std::size_t k = 0; k < kMaxBandPoints; ++k) v.segment<3>(3 * k) = pts[k];
  return v;
}

double band_distance(const Band& b1, const Band& b2) { return (upsample_flat(b1) - upsample_flat(b2)).norm(); }

bool visibility_deformable(const Band& a, const Band& b, const WorldGrid& grid) {
  const std::size_t n = std::max(a.size(), b.size());
  const auto ra = resample(a.points, n);
  const auto rb = resample(b.points, n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!grid.segment_collision_free(ra[k], rb[k], 0.0)) return false;
  }
  return true;
}

int vis_check(const Band& band, const Blacklist& blacklist, const WorldGrid& grid) {
  for (const auto& other : blacklist) {
    if (visibility_deformable(band, other, grid)) return 1;
  }
  return 0;
}

bool overstretched(const Band& band, double l_max) { return band_length(band) > l_max; }

double band_min_sdf(const Band& band, const WorldGrid& grid) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : band.points) m = std::min(m, grid.sdf(p));
  return m;
}

}  // namespace bandplan
