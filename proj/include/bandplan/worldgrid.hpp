#pragma once

#include "bandplan/common.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace bandplan {

struct Box {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Zero();
};

/// Cylinder with its axis along z.
struct Cylinder {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double half_height = 0.0;
};

using Obstacle = std::variant<Box, Cylinder>;

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 clamp(const Vec3& p) const { return p.cwiseMax(min).cwiseMin(max); }
  double diagonal() const { return (max - min).norm(); }
};

struct Scene {
  std::vector<Obstacle> obstacles;
  Aabb bounds;
  double resolution = 0.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Exact signed distance to a single primitive (negative inside).
double signed_distance(const Obstacle& obstacle, const Vec3& p);
Aabb bounding_box(const Obstacle& obstacle);

/// Distance reported where the scene has no obstacle at all.
inline constexpr double kFreeSpaceDistance = 1.0;
inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct NavQuery {
  Vec3 point = Vec3::Zero();
  std::size_t target_id = 0;
};

struct NavStep {
  Vec3 direction = Vec3::Zero();  // unit, or zero at the target voxel
  double distance = 0.0;          // remaining Dijkstra distance (meters)
};

/// Closest-obstacle query used by gripper proximity checks.
struct ObstacleProximity {
  double distance = kFreeSpaceDistance;  // signed distance to the closest obstacle surface
  Vec3 normal = Vec3::UnitZ();           // unit vector pointing away from that obstacle
  int obstacle = -1;                     // index into Scene::obstacles, -1 when none
};

struct TargetRegistration {
  std::vector<Vec3> targets;            // as used by the fields (projected when needed)
  std::vector<std::size_t> projected;   // indices that started inside an obstacle
};

/// Voxelized static environment: occupancy, signed distance and one Dijkstra
/// navigation field per registered target. Immutable after target registration.
class WorldGrid {
 public:
  static WorldGrid build(const Scene& scene);

  /// Computes one 26-connected Dijkstra field per target. Targets inside an
  /// obstacle are moved to the nearest free voxel center.
  TargetRegistration register_targets(std::span<const Vec3> targets);

  const Scene& scene() const { return scene_; }
  const Aabb& bounds() const { return scene_.bounds; }
  double resolution() const { return scene_.resolution; }
  std::array<int, 3> dims() const { return dims_; }
  std::size_t voxel_count() const { return occupancy_.size(); }

  std::size_t linear_index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * dims_[1] + iy) * dims_[0] + ix;
  }
  std::array<int, 3> voxel_coords(std::size_t index) const;
  /// Voxel containing p; points outside the bounds map to the nearest voxel.
  std::size_t voxel_of(const Vec3& p) const;
  Vec3 voxel_center(std::size_t index) const;

  bool occupied(std::size_t index) const { return occupancy_[index] != 0; }
  double voxel_sdf(std::size_t index) const { return sdf_[index]; }

  /// Trilinearly interpolated signed distance (meters).
  double sdf(const Vec3& p) const;
  /// Central-difference gradient of the interpolated field.
  Vec3 sdf_gradient(const Vec3& p) const;
  /// Analytic nearest obstacle; ties go to the lowest obstacle index.
  ObstacleProximity nearest_obstacle(const Vec3& p) const;

  /// Nearest free voxel to p (p's own voxel when free). Ties: lowest index.
  std::size_t nearest_free_voxel(const Vec3& p) const;

  std::size_t target_count() const { return nav_.size(); }
  const Vec3& target(std::size_t id) const { return nav_.at(id).target; }
  std::size_t target_voxel(std::size_t id) const { return nav_.at(id).source; }
  /// Field value of the voxel containing p, after projecting out of obstacles.
  double nav_distance(std::size_t target_id, const Vec3& p) const;
  double nav_voxel_distance(std::size_t target_id, std::size_t voxel) const {
    return nav_.at(target_id).distance[voxel];
  }
  /// Next voxel toward the target, or -1 at the target / when unreachable.
  std::int64_t nav_predecessor(std::size_t target_id, std::size_t voxel) const {
    return nav_.at(target_id).predecessor[voxel];
  }
  /// Direction toward the target along the field; nullopt when unreachable.
  std::optional<NavStep> nav_next_step(const NavQuery& q) const;

  /// Moves p along the sdf gradient until sdf >= clearance.
  Vec3 project_out_of_collision(const Vec3& p, double clearance) const;
  /// True iff sdf >= radius at samples spaced <= resolution/2 along [a, b].
  bool segment_collision_free(const Vec3& a, const Vec3& b, double radius) const;

 private:
  struct NavField {
    Vec3 target;
    std::size_t source = 0;
    std::vector<double> distance;
    std::vector<std::int64_t> predecessor;
  };

  NavField dijkstra(const Vec3& target, std::size_t source) const;
  double voxel_sdf_clamped(int ix, int iy, int iz) const;

  Scene scene_;
  std::array<int, 3> dims_{0, 0, 0};
  Vec3 origin_ = Vec3::Zero();  // center of voxel (0,0,0)
  std::vector<std::uint8_t> occupancy_;
  std::vector<double> sdf_;
  std::vector<NavField> nav_;
};

}  // namespace bandplan
