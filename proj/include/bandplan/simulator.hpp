#pragma once

#include "bandplan/deform.hpp"
#include "bandplan/worldgrid.hpp"

#include <vector>

namespace bandplan {

struct SimParams {
  double dt = 0.02;               // control period (s); gripper displacement = cmd * dt
  int iterations = 10;            // constraint iterations per substep (10 cloth / 4 rope)
  int substeps = 1;
  double stiffness = 1.0;         // distance-constraint stiffness in (0, 1]
  double settle_tol = 1e-4;       // quiescence threshold on per-sweep node displacement (m)
  int max_settle_sweeps = 200;
  double node_clearance = 0.01;   // nodes are kept at sdf >= node_clearance
  double gripper_radius = 0.025;
  double rigidity_decay = 10.0;   // 1/m, geodesic decay of the gripper-motion predictor
  /// Mesh edges may shorten to this fraction of their rest length before
  /// resisting compression; 0 leaves them one-sided (free to crumple).
  double compression_limit = 0.0;

  void validate() const;
};

/// Quasi-static simulator state. Plain value; `Simulator::step` returns a new one.
struct SimState {
  DeformConfig deform;
  Vec6 grippers = Vec6::Zero();
  std::array<std::vector<Vec3>, 2> grasp_offsets;  // grasped node minus gripper center
  bool gripper_clipped = false;  // last command was pushed out of collision
  double max_stretch = 1.0;      // max mesh-edge length / rest length
  int settle_sweeps = 0;
};

/// Position-based stand-in for a physics engine: distance constraints on the
/// mesh edges (plus both cloth diagonals) that forbid stretching and, when
/// compression_limit > 0, excessive compression; long-range attachments to the
/// grippers, node-vs-sdf collision, and grasped nodes rigidly attached to the
/// gripper centers.
class Simulator {
 public:
  Simulator(const DeformConfig& flat, const WorldGrid& grid, SimParams params);

  /// Initial state for the given object pose (same topology as the flat one).
  SimState initial_state(const DeformConfig& pose) const;

  /// Moves the grippers by cmd * dt and relaxes the object to quiescence.
  SimState step(const SimState& state, const Vec6& cmd) const;
  /// Same as `step`, updating the state in place.
  void advance(SimState& state, const Vec6& cmd) const;

  const SimParams& params() const { return params_; }
  const WorldGrid& grid() const { return *grid_; }
  /// Geodesic rest distance from every node to each gripper's grasped set.
  const std::array<std::vector<double>, 2>& node_geodesics() const { return geo_; }

  /// Maximum mesh-edge stretch ratio of a configuration.
  double max_edge_stretch(const std::vector<Vec3>& points) const;

 private:
  struct Constraint {
    std::size_t a;
    std::size_t b;
    double min_length;
    double max_length;
  };
  struct Attachment {
    std::size_t node;
    int gripper;
    std::size_t anchor;  // grasped node the distance is measured to
    double max_length;
  };

  double sweep(std::vector<Vec3>& x, const std::vector<char>& pinned, double stiffness) const;

  const WorldGrid* grid_;
  SimParams params_;
  std::vector<MeshEdge> stretch_edges_;
  std::vector<Constraint> constraints_;
  std::vector<Attachment> attachments_;
  std::array<std::vector<double>, 2> geo_;
  std::vector<char> pinned_;
};

}  // namespace bandplan
