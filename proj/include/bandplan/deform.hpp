#pragma once

#include "bandplan/common.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace bandplan {

enum class Topology { Rope, Cloth };

struct MeshEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double rest = 0.0;
};

/// The tracked points of a rope or cloth, the pairwise rest distances D of its
/// relaxed ("laid-flat") configuration, and the nodes held by each gripper.
struct DeformConfig {
  Topology topology = Topology::Rope;
  std::vector<Vec3> points;
  Eigen::MatrixXd rest_distances;                   // D, symmetric, zero diagonal
  std::array<std::vector<std::size_t>, 2> grasped;  // node indices per gripper
  std::vector<MeshEdge> edges;                      // rest-connectivity graph
  int rows = 1;                                     // cloth grid shape (rope: 1 x P)
  int cols = 0;

  std::size_t size() const { return points.size(); }
  /// Throws ModelError when an invariant is broken.
  void validate() const;
};

/// Straight rope of `nodes` points spanning `length` meters from `start` along
/// `direction`; gripper 0 holds the first node and gripper 1 the last.
DeformConfig make_rope(int nodes, double length, const Vec3& start, const Vec3& direction);

/// Flat rows x cols cloth. Node (r, c) sits at origin + c*dx*u + r*dy*v and has
/// index r*cols + c. Mesh edges are the grid edges plus one diagonal per cell.
DeformConfig make_cloth(int rows, int cols, double width, double height, const Vec3& origin,
                        const Vec3& u, const Vec3& v, std::array<std::vector<std::size_t>, 2> grasped);

/// Pairwise Euclidean distances between the given points.
Eigen::MatrixXd pairwise_distances(std::span<const Vec3> points);

/// Multi-source shortest path lengths over the mesh edges weighted by rest length.
std::vector<double> graph_distances(const DeformConfig& deform, std::span<const std::size_t> sources);

/// Node chain of a shortest mesh path from any node of gripper 0 to any node of
/// gripper 1. Throws ModelError when the grasped sets are disconnected.
std::vector<std::size_t> geodesic_node_path(const DeformConfig& deform);

/// Length of the shortest rest-length path between the two grasped sets.
double geodesic_between_grippers(const DeformConfig& deform);

/// Centroid of the nodes held by gripper g.
Vec3 grasp_centroid(const DeformConfig& deform, int g);

}  // namespace bandplan
