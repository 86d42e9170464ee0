#include "bandplan/worldgrid.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace bandplan {

namespace {

struct DistanceAndNormal {
  double distance;
  Vec3 normal;
};

DistanceAndNormal box_distance(const Box& box, const Vec3& p) {
  const Vec3 rel = p - box.center;
  Vec3 sign;
  for (int i = 0; i < 3; ++i) sign[i] = rel[i] < 0.0 ? -1.0 : 1.0;
  const Vec3 q = rel.cwiseAbs() - box.half_extents;
  const Vec3 outside = q.cwiseMax(0.0);
  const double out_norm = outside.norm();
  if (out_norm > 0.0) {
    return {out_norm, sign.cwiseProduct(outside) / out_norm};
  }
  int axis = 0;
  q.maxCoeff(&axis);
  Vec3 n = Vec3::Zero();
  n[axis] = sign[axis];
  return {q[axis], n};
}

DistanceAndNormal cylinder_distance(const Cylinder& cyl, const Vec3& p) {
  const Eigen::Vector2d rel_xy = (p - cyl.center).head<2>();
  const double r = rel_xy.norm();
  const Vec3 radial = r > 1e-12 ? Vec3(rel_xy.x() / r, rel_xy.y() / r, 0.0) : Vec3::UnitX();
  const double dz = p.z() - cyl.center.z();
  const double sz = dz < 0.0 ? -1.0 : 1.0;
  const double qr = r - cyl.radius;
  const double qz = std::abs(dz) - cyl.half_height;
  const double or_ = std::max(qr, 0.0);
  const double oz = std::max(qz, 0.0);
  const double out_norm = std::hypot(or_, oz);
  if (out_norm > 0.0) {
    return {out_norm, (radial * or_ + Vec3::UnitZ() * (sz * oz)) / out_norm};
  }
  if (qr > qz) return {qr, radial};
  return {qz, Vec3::UnitZ() * sz};
}

DistanceAndNormal distance_and_normal(const Obstacle& obstacle, const Vec3& p) {
  return std::visit(
      [&](const auto& shape) {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, Box>) {
          return box_distance(shape, p);
        } else {
          return cylinder_distance(shape, p);
        }
      },
      obstacle);
}

std::string vec_str(const Vec3& v) {
  std::ostringstream os;
  os << "(" << v.x() << ", " << v.y() << ", " << v.z() << ")";
  return os.str();
}

}  // namespace

double signed_distance(const Obstacle& obstacle, const Vec3& p) {
  return distance_and_normal(obstacle, p).distance;
}

Aabb bounding_box(const Obstacle& obstacle) {
  return std::visit(
      [](const auto& shape) {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, Box>) {
          return Aabb{shape.center - shape.half_extents, shape.center + shape.half_extents};
        } else {
          const Vec3 h(shape.radius, shape.radius, shape.half_height);
          return Aabb{shape.center - h, shape.center + h};
        }
      },
      obstacle);
}

void Scene::validate() const {
  if (!(resolution > 0.0)) throw ConfigError("scene.resolution: must be positive");
  if (!((bounds.max - bounds.min).array() > 0.0).all()) {
    throw ConfigError("scene.bounds: must have positive volume");
  }
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const std::string where = "scene.obstacles[" + std::to_string(i) + "]";
    const bool positive = std::visit(
        [](const auto& shape) {
          using T = std::decay_t<decltype(shape)>;
          if constexpr (std::is_same_v<T, Box>) {
            return (shape.half_extents.array() > 0.0).all();
          } else {
            return shape.radius > 0.0 && shape.half_height > 0.0;
          }
        },
        obstacles[i]);
    if (!positive) throw ConfigError(where + ": extents must be positive");
    const Aabb box = bounding_box(obstacles[i]);
    if ((box.max.array() < bounds.min.array()).any() || (box.min.array() > bounds.max.array()).any()) {
      throw ConfigError(where + ": does not intersect the workspace bounds");
    }
  }
}

WorldGrid WorldGrid::build(const Scene& scene) {
  scene.validate();
  WorldGrid grid;
  grid.scene_ = scene;
  const double res = scene.resolution;
  const Vec3 extent = scene.bounds.max - scene.bounds.min;
  for (int i = 0; i < 3; ++i) {
    const int n = static_cast<int>(std::floor(extent[i] / res + 1e-6));
    if (n < 1) {
      throw ConfigError("scene.bounds: workspace too small to contain a single voxel of size " +
                        std::to_string(res));
    }
    grid.dims_[i] = n;
  }
  grid.origin_ = scene.bounds.min + Vec3::Constant(0.5 * res);
  const std::size_t count = static_cast<std::size_t>(grid.dims_[0]) * grid.dims_[1] * grid.dims_[2];
  grid.occupancy_.assign(count, 0);
  grid.sdf_.assign(count, kFreeSpaceDistance);
  for (std::size_t idx = 0; idx < count; ++idx) {
    const Vec3 c = grid.voxel_center(idx);
    double d = kFreeSpaceDistance;
    for (const auto& obstacle : scene.obstacles) d = std::min(d, signed_distance(obstacle, c));
    grid.sdf_[idx] = d;
    grid.occupancy_[idx] = d <= 0.0 ? 1 : 0;
  }
  return grid;
}

std::array<int, 3> WorldGrid::voxel_coords(std::size_t index) const {
  const int ix = static_cast<int>(index % dims_[0]);
  const int iy = static_cast<int>((index / dims_[0]) % dims_[1]);
  const int iz = static_cast<int>(index / (static_cast<std::size_t>(dims_[0]) * dims_[1]));
  return {ix, iy, iz};
}

std::size_t WorldGrid::voxel_of(const Vec3& p) const {
  std::array<int, 3> c{};
  for (int i = 0; i < 3; ++i) {
    const int v = static_cast<int>(std::floor((p[i] - scene_.bounds.min[i]) / scene_.resolution));
    c[i] = std::clamp(v, 0, dims_[i] - 1);
  }
  return linear_index(c[0], c[1], c[2]);
}

Vec3 WorldGrid::voxel_center(std::size_t index) const {
  const auto c = voxel_coords(index);
  return origin_ + scene_.resolution * Vec3(c[0], c[1], c[2]);
}

double WorldGrid::voxel_sdf_clamped(int ix, int iy, int iz) const {
  ix = std::clamp(ix, 0, dims_[0] - 1);
  iy = std::clamp(iy, 0, dims_[1] - 1);
  iz = std::clamp(iz, 0, dims_[2] - 1);
  return sdf_[linear_index(ix, iy, iz)];
}

double WorldGrid::sdf(const Vec3& p) const {
  const Vec3 u = (p - origin_) / scene_.resolution;
  int base[3];
  double t[3];
  for (int i = 0; i < 3; ++i) {
    const double ui = std::clamp(u[i], 0.0, static_cast<double>(dims_[i] - 1));
    base[i] = std::min(static_cast<int>(std::floor(ui)), std::max(dims_[i] - 2, 0));
    t[i] = ui - base[i];
  }
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? t[2] : 1.0 - t[2];
    if (wz == 0.0) continue;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? t[1] : 1.0 - t[1];
      if (wy == 0.0) continue;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? t[0] : 1.0 - t[0];
        if (wx == 0.0) continue;
        acc += wx * wy * wz * voxel_sdf_clamped(base[0] + dx, base[1] + dy, base[2] + dz);
      }
    }
  }
  return acc;
}

Vec3 WorldGrid::sdf_gradient(const Vec3& p) const {
  const double h = 0.5 * scene_.resolution;
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = h;
    g[i] = (sdf(p + e) - sdf(p - e)) / (2.0 * h);
  }
  return g;
}

ObstacleProximity WorldGrid::nearest_obstacle(const Vec3& p) const {
  ObstacleProximity best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene_.obstacles.size(); ++i) {
    const auto dn = distance_and_normal(scene_.obstacles[i], p);
    if (dn.distance < best.distance) {
      best.distance = dn.distance;
      best.normal = dn.normal;
      best.obstacle = static_cast<int>(i);
    }
  }
  if (best.obstacle < 0) best.distance = kFreeSpaceDistance;
  return best;
}

std::size_t WorldGrid::nearest_free_voxel(const Vec3& p) const {
  const std::size_t own = voxel_of(p);
  if (!occupied(own)) return own;
  const auto c = voxel_coords(own);
  const double res = scene_.resolution;
  const int max_r = std::max({dims_[0], dims_[1], dims_[2]});
  double best_d = std::numeric_limits<double>::infinity();
  std::size_t best = own;
  bool found = false;
  for (int r = 1; r <= max_r; ++r) {
    if (found && (r - 0.5) * res > best_d) break;
    for (int z = c[2] - r; z <= c[2] + r; ++z) {
      if (z < 0 || z >= dims_[2]) continue;
      for (int y = c[1] - r; y <= c[1] + r; ++y) {
        if (y < 0 || y >= dims_[1]) continue;
        for (int x = c[0] - r; x <= c[0] + r; ++x) {
          if (x < 0 || x >= dims_[0]) continue;
          const int cheb = std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])});
          if (cheb != r) continue;
          const std::size_t idx = linear_index(x, y, z);
          if (occupied(idx)) continue;
          const double d = (voxel_center(idx) - p).norm();
          if (d < best_d || (d == best_d && idx < best)) {
            best_d = d;
            best = idx;
            found = true;
          }
        }
      }
    }
  }
  if (!found) throw WorkspaceSaturated("no free voxel in the workspace");
  return best;
}

TargetRegistration WorldGrid::register_targets(std::span<const Vec3> targets) {
  TargetRegistration out;
  nav_.clear();
  nav_.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Vec3& t = targets[i];
    if (!scene_.bounds.contains(t)) {
      throw ConfigError("task.targets[" + std::to_string(i) + "]: " + vec_str(t) +
                        " lies outside the workspace bounds");
    }
    std::size_t source = voxel_of(t);
    Vec3 used = t;
    if (occupied(source)) {
      source = nearest_free_voxel(t);
      used = voxel_center(source);
      out.projected.push_back(i);
    }
    nav_.push_back(dijkstra(used, source));
    out.targets.push_back(used);
  }
  return out;
}

WorldGrid::NavField WorldGrid::dijkstra(const Vec3& target, std::size_t source) const {
  NavField field;
  field.target = target;
  field.source = source;
  field.distance.assign(voxel_count(), kUnreachable);
  field.predecessor.assign(voxel_count(), -1);

  struct Offset {
    int dx, dy, dz;
    double w;
  };
  std::vector<Offset> offsets;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        offsets.push_back({dx, dy, dz, scene_.resolution * std::sqrt(double(dx * dx + dy * dy + dz * dz))});
      }

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  field.distance[source] = 0.0;
  open.emplace(0.0, source);
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d > field.distance[u]) continue;
    const auto c = voxel_coords(u);
    for (const auto& o : offsets) {
      const int x = c[0] + o.dx, y = c[1] + o.dy, z = c[2] + o.dz;
      if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) continue;
      const std::size_t v = linear_index(x, y, z);
      if (occupied(v)) continue;
      const double nd = d + o.w;
      if (nd < field.distance[v]) {
        field.distance[v] = nd;
        field.predecessor[v] = static_cast<std::int64_t>(u);
        open.emplace(nd, v);
      } else if (nd == field.distance[v] && static_cast<std::int64_t>(u) < field.predecessor[v]) {
        field.predecessor[v] = static_cast<std::int64_t>(u);
      }
    }
  }
  return field;
}

double WorldGrid::nav_distance(std::size_t target_id, const Vec3& p) const {
  return nav_.at(target_id).distance[nearest_free_voxel(p)];
}

std::optional<NavStep> WorldGrid::nav_next_step(const NavQuery& q) const {
  constexpr int kLookahead = 8;
  const NavField& field = nav_.at(q.target_id);
  const std::size_t v = nearest_free_voxel(q.point);
  const double d = field.distance[v];
  if (!std::isfinite(d)) return std::nullopt;
  if (v == field.source) return NavStep{Vec3::Zero(), 0.0};

  std::int64_t best = field.predecessor[v];
  std::int64_t cur = best;
  for (int k = 1; k < kLookahead; ++k) {
    const std::int64_t next = field.predecessor[static_cast<std::size_t>(cur)];
    if (next < 0) break;
    if (!segment_collision_free(q.point, voxel_center(static_cast<std::size_t>(next)), 0.0)) break;
    best = cur = next;
  }
  Vec3 dir = voxel_center(static_cast<std::size_t>(best)) - q.point;
  if (dir.norm() < 1e-9) dir = voxel_center(static_cast<std::size_t>(best)) - voxel_center(v);
  return NavStep{dir.normalized(), d};
}

Vec3 WorldGrid::project_out_of_collision(const Vec3& p, double clearance) const {
  if (clearance < 0.0) throw ConfigError("project_out_of_collision: clearance must be >= 0");
  Vec3 x = p;
  for (int it = 0; it < 64; ++it) {
    const double s = sdf(x);
    if (s >= clearance) return x;
    const Vec3 g = sdf_gradient(x);
    const double n = g.norm();
    if (n < 1e-9) break;
    x = scene_.bounds.clamp(x + g / n * (clearance - s + 1e-6));
  }
  // Gradient descent stalled (medial axis or clamped at the bounds): fall back
  // to the nearest voxel center that satisfies the clearance.
  double best_d = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (std::size_t idx = 0; idx < sdf_.size(); ++idx) {
    if (sdf_[idx] < clearance) continue;
    const double d = (voxel_center(idx) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = idx;
    }
  }
  if (!std::isfinite(best_d)) {
    throw WorkspaceSaturated("workspace saturated: no point reaches clearance " + std::to_string(clearance));
  }
  return voxel_center(best);
}

bool WorldGrid::segment_collision_free(const Vec3& a, const Vec3& b, double radius) const {
  const double len = (b - a).norm();
  const int n = static_cast<int>(std::ceil(len / (0.5 * scene_.resolution)));
  for (int k = 0; k <= n; ++k) {
    const double t = n == 0 ? 0.0 : static_cast<double>(k) / n;
    if (sdf(a + t * (b - a)) < radius) return false;
  }
  return true;
}

}  // namespace bandplan
