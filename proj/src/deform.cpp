#include "bandplan/deform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace bandplan {

void DeformConfig::validate() const {
  const std::size_t n = points.size();
  if (n == 0) throw ModelError("object has no points");
  if (rest_distances.rows() != static_cast<Eigen::Index>(n) || rest_distances.cols() != static_cast<Eigen::Index>(n)) {
    throw ModelError("rest distance matrix does not match the point count");
  }
  if (!rest_distances.isApprox(rest_distances.transpose(), 1e-12) ||
      rest_distances.diagonal().cwiseAbs().maxCoeff() > 0.0) {
    throw ModelError("rest distance matrix must be symmetric with a zero diagonal");
  }
  for (int g = 0; g < 2; ++g) {
    if (grasped[g].empty()) throw ModelError("gripper " + std::to_string(g) + " holds no nodes");
    for (std::size_t idx : grasped[g]) {
      if (idx >= n) throw ModelError("grasped node index " + std::to_string(idx) + " out of range");
    }
  }
  for (std::size_t a : grasped[0]) {
    if (std::find(grasped[1].begin(), grasped[1].end(), a) != grasped[1].end()) {
      throw ModelError("grasped node sets must be disjoint");
    }
  }
  for (const auto& e : edges) {
    if (e.a >= n || e.b >= n || e.a == e.b || !(e.rest > 0.0)) throw ModelError("invalid mesh edge");
  }
}

Eigen::MatrixXd pairwise_distances(std::span<const Vec3> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points[i] - points[j]).norm();
    }
  }
  return d;
}

DeformConfig make_rope(int nodes, double length, const Vec3& start, const Vec3& direction) {
  if (nodes < 2) throw ConfigError("object.nodes: a rope needs at least 2 nodes");
  if (!(length > 0.0)) throw ConfigError("object.length: must be positive");
  if (direction.norm() < 1e-12) throw ConfigError("object.direction: must be non-zero");
  DeformConfig d;
  d.topology = Topology::Rope;
  d.rows = 1;
  d.cols = nodes;
  const Vec3 dir = direction.normalized();
  const double spacing = length / (nodes - 1);
  for (int i = 0; i < nodes; ++i) d.points.push_back(start + dir * (spacing * i));
  for (int i = 0; i + 1 < nodes; ++i) {
    d.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1), spacing});
  }
  d.rest_distances = pairwise_distances(d.points);
  d.grasped = {std::vector<std::size_t>{0}, std::vector<std::size_t>{static_cast<std::size_t>(nodes - 1)}};
  d.validate();
  return d;
}

DeformConfig make_cloth(int rows, int cols, double width, double height, const Vec3& origin,
                        const Vec3& u, const Vec3& v, std::array<std::vector<std::size_t>, 2> grasped) {
  if (rows < 2 || cols < 2) throw ConfigError("object.rows/cols: a cloth needs at least 2x2 nodes");
  if (!(width > 0.0) || !(height > 0.0)) throw ConfigError("object.size: must be positive");
  DeformConfig d;
  d.topology = Topology::Cloth;
  d.rows = rows;
  d.cols = cols;
  const Vec3 du = u.normalized() * (width / (cols - 1));
  const Vec3 dv = v.normalized() * (height / (rows - 1));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) d.points.push_back(origin + du * c + dv * r);
  auto id = [cols](int r, int c) { return static_cast<std::size_t>(r * cols + c); };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) d.edges.push_back({id(r, c), id(r, c + 1), du.norm()});
      if (r + 1 < rows) d.edges.push_back({id(r, c), id(r + 1, c), dv.norm()});
      if (r + 1 < rows && c + 1 < cols) d.edges.push_back({id(r, c), id(r + 1, c + 1), (du + dv).norm()});
    }
  }
  d.rest_distances = pairwise_distances(d.points);
  d.grasped = std::move(grasped);
  d.validate();
  return d;
}

namespace {

struct GraphSearch {
  std::vector<double> dist;
  std::vector<std::int64_t> parent;
};

GraphSearch search(const DeformConfig& deform, std::span<const std::size_t> sources) {
  const std::size_t n = deform.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& e : deform.edges) {
    adj[e.a].emplace_back(e.b, e.rest);
    adj[e.b].emplace_back(e.a, e.rest);
  }
  GraphSearch out;
  out.dist.assign(n, std::numeric_limits<double>::infinity());
  out.parent.assign(n, -1);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  for (std::size_t s : sources) {
    out.dist[s] = 0.0;
    open.emplace(0.0, s);
  }
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d > out.dist[u]) continue;
    for (const auto& [v, w] : adj[u]) {
      if (d + w < out.dist[v]) {
        out.dist[v] = d + w;
        out.parent[v] = static_cast<std::int64_t>(u);
        open.emplace(d + w, v);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<double> graph_distances(const DeformConfig& deform, std::span<const std::size_t> sources) {
  return search(deform, sources).dist;
}

std::vector<std::size_t> geodesic_node_path(const DeformConfig& deform) {
  const auto s = search(deform, deform.grasped[0]);
  std::size_t best = deform.grasped[1].front();
  for (std::size_t idx : deform.grasped[1]) {
    if (s.dist[idx] < s.dist[best]) best = idx;
  }
  if (!std::isfinite(s.dist[best])) throw ModelError("grasped nodes are disconnected in the mesh graph");
  std::vector<std::size_t> chain;
  for (std::int64_t cur = static_cast<std::int64_t>(best); cur >= 0; cur = s.parent[cur]) {
    chain.push_back(static_cast<std::size_t>(cur));
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

double geodesic_between_grippers(const DeformConfig& deform) {
  for (std::size_t a : deform.grasped[0]) {
    if (std::find(deform.grasped[1].begin(), deform.grasped[1].end(), a) != deform.grasped[1].end()) {
      return 0.0;
    }
  }
  const auto dist = graph_distances(deform, deform.grasped[0]);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t idx : deform.grasped[1]) best = std::min(best, dist[idx]);
  if (!std::isfinite(best)) throw ModelError("grasped nodes are disconnected in the mesh graph");
  return best;
}

Vec3 grasp_centroid(const DeformConfig& deform, int g) {
  Vec3 c = Vec3::Zero();
  for (std::size_t idx : deform.grasped[g]) c += deform.points[idx];
  return c / static_cast<double>(deform.grasped[g].size());
}

}  // namespace bandplan
