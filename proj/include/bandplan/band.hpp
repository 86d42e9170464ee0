#pragma once

#include "bandplan/deform.hpp"
#include "bandplan/worldgrid.hpp"

#include <span>
#include <vector>

namespace bandplan {

/// Maximum number of band points; also the upsampling count of band_distance.
inline constexpr std::size_t kMaxBandPoints = 500;

struct BandParams {
  double max_segment_length = 0.02;  // defaults to the grid resolution
  double clearance = 0.01;           // pull-tight keeps interior points at sdf >= clearance
  double tighten_tol = 1e-4;
  int max_iters = 500;
  std::size_t max_points = kMaxBandPoints;

  /// Resolution-derived defaults: segment = res, clearance = res / 2.
  static BandParams for_grid(const WorldGrid& grid);
};

/// Ordered gripper-to-gripper point sequence (the virtual elastic band).
struct Band {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  const Vec3& front() const { return points.front(); }
  const Vec3& back() const { return points.back(); }
};

using Blacklist = std::vector<Band>;

double band_length(const Band& band);
double band_length(std::span<const Vec3> points);

/// Arc-length resampling to exactly n >= 2 points by linear interpolation.
std::vector<Vec3> resample(std::span<const Vec3> points, std::size_t n);

/// Inserts evenly spaced points so consecutive points are <= max_len apart.
std::vector<Vec3> interpolate_points(std::span<const Vec3> points, double max_len);

/// Drops interior points whose neighbours see each other at `clearance`.
std::vector<Vec3> remove_extra_points(std::span<const Vec3> points, const WorldGrid& grid, double clearance);

/// Contracts the band toward the taut geodesic with fixed endpoints while
/// keeping it out of obstacle interiors. Never increases the band length.
Band pull_tight(const Band& band, const WorldGrid& grid, const BandParams& params);

/// Prepends/appends the new gripper positions, re-interpolates, removes
/// redundant points and pulls tight. Throws InvalidGripperTarget when an
/// endpoint lies inside an obstacle.
Band forward_propagate(const Band& band, const Vec3& p0, const Vec3& p1, const WorldGrid& grid,
                       const BandParams& params);

/// Band along the object's mesh geodesic between the grasped nodes, pulled tight.
Band initialize_band(const DeformConfig& deform, const Vec3& g0, const Vec3& g1, const WorldGrid& grid,
                     const BandParams& params);
/// Same, with the grasp centroids as endpoints.
Band initialize_band(const DeformConfig& deform, const WorldGrid& grid, const BandParams& params);

/// Both bands upsampled to kMaxBandPoints; Euclidean norm of the difference.
double band_distance(const Band& b1, const Band& b2);
/// Upsampled coordinates used by band_distance (3 * kMaxBandPoints values).
Eigen::VectorXd upsample_flat(const Band& band);

/// 1 iff the band is visibility-deformable into some blacklisted band.
int vis_check(const Band& band, const Blacklist& blacklist, const WorldGrid& grid);
/// Pairwise visibility-deformation test used by vis_check.
bool visibility_deformable(const Band& a, const Band& b, const WorldGrid& grid);

bool overstretched(const Band& band, double l_max);

/// Minimum sdf over the band points.
double band_min_sdf(const Band& band, const WorldGrid& grid);

}  // namespace bandplan
