#include "bandplan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bandplan {

void SimParams::validate() const {
  if (!(dt > 0.0)) throw ConfigError("simulator.dt: must be positive");
  if (iterations < 1) throw ConfigError("simulator.iterations: must be >= 1");
  if (substeps < 1) throw ConfigError("simulator.substeps: must be >= 1");
  if (!(stiffness > 0.0 && stiffness <= 1.0)) throw ConfigError("simulator.stiffness: must be in (0, 1]");
  if (!(settle_tol > 0.0)) throw ConfigError("simulator.settle_tol: must be positive");
  if (max_settle_sweeps < 0) throw ConfigError("simulator.max_settle_sweeps: must be >= 0");
  if (!(node_clearance >= 0.0)) throw ConfigError("simulator.node_clearance: must be >= 0");
  if (!(gripper_radius >= 0.0)) throw ConfigError("simulator.gripper_radius: must be >= 0");
  if (!(rigidity_decay >= 0.0)) throw ConfigError("simulator.rigidity_decay: must be >= 0");
  if (!(compression_limit >= 0.0 && compression_limit < 1.0)) {
    throw ConfigError("simulator.compression_limit: must be in [0, 1)");
  }
}

Simulator::Simulator(const DeformConfig& flat, const WorldGrid& grid, SimParams params)
    : grid_(&grid), params_(params) {
  params_.validate();
  flat.validate();
  const std::size_t n = flat.size();
  pinned_.assign(n, 0);
  for (int g = 0; g < 2; ++g)
    for (std::size_t idx : flat.grasped[g]) pinned_[idx] = 1;

  stretch_edges_ = flat.edges;
  if (flat.topology == Topology::Cloth) {
    // The triangle mesh carries one diagonal per cell; add the other one so
    // the cloth resists shear symmetrically.
    const int rows = flat.rows, cols = flat.cols;
    for (int r = 0; r + 1 < rows; ++r) {
      for (int c = 0; c + 1 < cols; ++c) {
        const std::size_t a = static_cast<std::size_t>(r * cols + c + 1);
        const std::size_t b = static_cast<std::size_t>((r + 1) * cols + c);
        stretch_edges_.push_back({a, b, flat.rest_distances(a, b)});
      }
    }
  }
  for (const auto& e : stretch_edges_) constraints_.push_back({e.a, e.b, params_.compression_limit * e.rest, e.rest});

  for (int g = 0; g < 2; ++g) {
    geo_[g] = graph_distances(flat, flat.grasped[g]);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(geo_[g][i])) throw ModelError("object mesh is disconnected");
      if (pinned_[i]) continue;
      std::size_t anchor = flat.grasped[g].front();
      for (std::size_t k : flat.grasped[g]) {
        if (flat.rest_distances(i, k) < flat.rest_distances(i, anchor)) anchor = k;
      }
      attachments_.push_back({i, g, anchor, flat.rest_distances(i, anchor)});
    }
  }
}

SimState Simulator::initial_state(const DeformConfig& pose) const {
  pose.validate();
  if (pose.size() != pinned_.size()) throw ModelError("object pose does not match the simulator mesh");
  SimState s;
  s.deform = pose;
  for (std::size_t i = 0; i < pose.size(); ++i) {
    if (!pinned_[i] && grid_->sdf(pose.points[i]) < params_.node_clearance) {
      s.deform.points[i] = grid_->project_out_of_collision(pose.points[i], params_.node_clearance);
    }
  }
  for (int g = 0; g < 2; ++g) {
    const Vec3 c = grasp_centroid(pose, g);
    s.grippers.segment<3>(3 * g) = c;
    for (std::size_t idx : pose.grasped[g]) s.grasp_offsets[g].push_back(pose.points[idx] - c);
  }
  s.max_stretch = max_edge_stretch(s.deform.points);
  return s;
}

double Simulator::max_edge_stretch(const std::vector<Vec3>& points) const {
  double worst = 0.0;
  for (const auto& e : stretch_edges_) {
    worst = std::max(worst, (points[e.a] - points[e.b]).norm() / e.rest);
  }
  return worst;
}

double Simulator::sweep(std::vector<Vec3>& x, const std::vector<char>& pinned, double stiffness) const {
  const std::vector<Vec3> before = x;
  for (const auto& c : constraints_) {
    const double wa = pinned[c.a] ? 0.0 : 1.0;
    const double wb = pinned[c.b] ? 0.0 : 1.0;
    if (wa + wb == 0.0) continue;
    const Vec3 d = x[c.b] - x[c.a];
    const double len = d.norm();
    if (len == 0.0 || (len <= c.max_length && len >= c.min_length)) continue;
    const double goal = len > c.max_length ? c.max_length : c.min_length;
    const Vec3 corr = stiffness * (len - goal) / len * d;
    x[c.a] += wa / (wa + wb) * corr;
    x[c.b] -= wb / (wa + wb) * corr;
  }
  for (const auto& a : attachments_) {
    const Vec3 d = x[a.node] - x[a.anchor];
    const double len = d.norm();
    if (len > a.max_length) x[a.node] = x[a.anchor] + d * (a.max_length / len);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (pinned[i]) continue;
    if (grid_->sdf(x[i]) < params_.node_clearance) {
      x[i] = grid_->project_out_of_collision(x[i], params_.node_clearance);
    }
  }
  double moved = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) moved = std::max(moved, (x[i] - before[i]).norm());
  return moved;
}

void Simulator::advance(SimState& state, const Vec6& cmd) const {
  auto& x = state.deform.points;
  state.gripper_clipped = false;
  Vec6 target = state.grippers + cmd * params_.dt;
  for (int g = 0; g < 2; ++g) {
    const Vec3 p = target.segment<3>(3 * g);
    if (grid_->sdf(p) < params_.gripper_radius) {
      target.segment<3>(3 * g) = grid_->project_out_of_collision(p, params_.gripper_radius);
      state.gripper_clipped = true;
    }
  }

  const Vec6 start = state.grippers;
  for (int sub = 1; sub <= params_.substeps; ++sub) {
    const Vec6 prev = start + (target - start) * (static_cast<double>(sub - 1) / params_.substeps);
    const Vec6 next = start + (target - start) * (static_cast<double>(sub) / params_.substeps);
    const Vec3 d0 = next.segment<3>(0) - prev.segment<3>(0);
    const Vec3 d1 = next.segment<3>(3) - prev.segment<3>(3);
    // Predictor: free nodes follow a geodesic-weighted blend of the gripper
    // displacements, so a rigid gripper motion transports a relaxed object
    // exactly and the constraints only resolve the non-rigid part.
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (pinned_[i]) continue;
      const double w0 = std::exp(-params_.rigidity_decay * geo_[0][i]);
      const double w1 = std::exp(-params_.rigidity_decay * geo_[1][i]);
      const double sum = w0 + w1;
      if (sum > 0.0) x[i] += (w0 * d0 + w1 * d1) / sum;
      else x[i] += 0.5 * (d0 + d1);
    }
    for (int g = 0; g < 2; ++g) {
      const Vec3 c = next.segment<3>(3 * g);
      const auto& nodes = state.deform.grasped[g];
      for (std::size_t k = 0; k < nodes.size(); ++k) x[nodes[k]] = c + state.grasp_offsets[g][k];
    }
    for (int it = 0; it < params_.iterations; ++it) sweep(x, pinned_, params_.stiffness);
  }
  state.grippers = target;

  int sweeps = 0;
  while (sweeps < params_.max_settle_sweeps) {
    ++sweeps;
    if (sweep(x, pinned_, params_.stiffness) < params_.settle_tol) break;
  }
  state.settle_sweeps = sweeps;
  state.max_stretch = max_edge_stretch(x);
}

SimState Simulator::step(const SimState& state, const Vec6& cmd) const {
  SimState next = state;
  advance(next, cmd);
  return next;
}

}  // namespace bandplan
