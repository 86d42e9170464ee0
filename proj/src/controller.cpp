#include "bandplan/controller.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bandplan {

void ControllerParams::validate() const {
  if (!(v_max_ee > 0.0)) throw ConfigError("controller.v_max_ee: must be positive");
  if (!(v_max_obs > 0.0)) throw ConfigError("controller.v_max_obs: must be positive");
  if (!(beta > 0.0)) throw ConfigError("controller.beta: must be positive");
  if (!(lambda_s > 0.0)) throw ConfigError("controller.lambda_s: must be positive");
  if (!(lambda_w > 0.0)) throw ConfigError("controller.lambda_w: must be positive");
  if (!(jacobian_decay > 0.0)) throw ConfigError("controller.jacobian_decay: must be positive");
  if (!(gripper_radius >= 0.0)) throw ConfigError("controller.gripper_radius: must be >= 0");
}

std::vector<std::size_t> Correspondences::uncovered() const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < covered.size(); ++t)
    if (!covered[t]) out.push_back(t);
  return out;
}

DesiredMotion DesiredMotion::zeros(std::size_t points) {
  return {Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(points)),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(points))};
}

RigidityModel RigidityModel::from_geodesics(const std::array<std::vector<double>, 2>& geodesics, double k) {
  RigidityModel m;
  for (int g = 0; g < 2; ++g) {
    m.coeff[g].reserve(geodesics[g].size());
    for (double d : geodesics[g]) m.coeff[g].push_back(std::exp(-k * d));
  }
  return m;
}

RigidityModel RigidityModel::from_deform(const DeformConfig& flat, double k) {
  return from_geodesics({graph_distances(flat, flat.grasped[0]), graph_distances(flat, flat.grasped[1])}, k);
}

Correspondences calculate_correspondences(const std::vector<Vec3>& points, const WorldGrid& grid,
                                          const TaskMatching& matching) {
  const std::size_t n_targets = grid.target_count();
  Correspondences c;
  c.per_point.assign(points.size(), {});
  c.covered.assign(n_targets, 0);

  std::vector<std::size_t> voxels(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) voxels[j] = grid.nearest_free_voxel(points[j]);
  const double thr2 = matching.cover_threshold * matching.cover_threshold;

  for (std::size_t t = 0; t < n_targets; ++t) {
    const Vec3& target = grid.target(t);
    if (matching.mode == CorrespondenceMode::Fixed) {
      const std::size_t j = matching.fixed_points.at(t);
      if ((points[j] - target).squaredNorm() <= thr2) {
        c.covered[t] = 1;
        ++c.covered_count;
        continue;
      }
      const double d = grid.nav_voxel_distance(t, voxels[j]);
      if (!std::isfinite(d)) {
        ++c.unreachable;
        continue;
      }
      c.per_point[j].emplace_back(t, d);
      c.error += d;
      continue;
    }
    bool covered = false;
    for (const auto& p : points) {
      if ((p - target).squaredNorm() <= thr2) {
        covered = true;
        break;
      }
    }
    if (covered) {
      c.covered[t] = 1;
      ++c.covered_count;
      continue;
    }
    double best = kUnreachable;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      const double d = grid.nav_voxel_distance(t, voxels[j]);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    if (!std::isfinite(best)) {
      ++c.unreachable;
      continue;
    }
    c.per_point[best_j].emplace_back(t, best);
    c.error += best;
  }
  return c;
}

DesiredMotion follow_navigation_function(const std::vector<Vec3>& points, const Correspondences& corr,
                                         const WorldGrid& grid) {
  DesiredMotion m = DesiredMotion::zeros(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) {
    for (const auto& [t, d] : corr.per_point[j]) {
      const auto step = grid.nav_next_step({points[j], t});
      if (!step) continue;
      m.velocities.segment<3>(3 * j) += step->direction;
      m.weights[j] = std::max(m.weights[j], d);
    }
  }
  return m;
}

DesiredMotion stretching_correction(const std::vector<Vec3>& points, const Eigen::MatrixXd& rest_distances,
                                    double lambda_s) {
  const std::size_t n = points.size();
  DesiredMotion m = DesiredMotion::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double rest = rest_distances(i, j);
      const Vec3 diff = points[j] - points[i];
      const double e = diff.norm();
      if (e <= lambda_s * rest) continue;
      const double excess = e - rest;
      const Vec3 v = excess * diff / e;
      m.velocities.segment<3>(3 * i) += 0.5 * v;
      m.velocities.segment<3>(3 * j) -= 0.5 * v;
      m.weights[i] = std::max(m.weights[i], excess);
      m.weights[j] = std::max(m.weights[j], excess);
    }
  }
  return m;
}

DesiredMotion combine_terms(const DesiredMotion& e, const DesiredMotion& s, double lambda_w) {
  const auto n = e.weights.size();
  DesiredMotion out = DesiredMotion::zeros(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 sv = s.velocities.segment<3>(3 * i);
    const Vec3 ev = e.velocities.segment<3>(3 * i);
    const double ss = sv.squaredNorm();
    Vec3 v = ev;
    if (ss > 0.0) v = sv + (ev - (ev.dot(sv) / ss) * sv);
    out.velocities.segment<3>(3 * i) = v;
    out.weights[i] = lambda_w * s.weights[i] + e.weights[i];
  }
  return out;
}

namespace {

struct Quadratic {
  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();          // coupling between grippers
  Eigen::Matrix<double, 2, 3> b = Eigen::Matrix<double, 2, 3>::Zero();
  double c = 0.0;
};

Quadratic assemble(const RigidityModel& model, const DesiredMotion& desired) {
  Quadratic q;
  const std::size_t n = model.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = desired.weights[static_cast<Eigen::Index>(i)];
    if (w == 0.0) continue;
    const double a0 = model.coeff[0][i];
    const double a1 = model.coeff[1][i];
    const Vec3 v = desired.velocities.segment<3>(3 * static_cast<Eigen::Index>(i));
    q.h(0, 0) += w * a0 * a0;
    q.h(0, 1) += w * a0 * a1;
    q.h(1, 1) += w * a1 * a1;
    q.b.row(0) += w * a0 * v.transpose();
    q.b.row(1) += w * a1 * v.transpose();
    q.c += w * v.squaredNorm();
  }
  q.h(1, 0) = q.h(0, 1);
  return q;
}

using Mat23 = Eigen::Matrix<double, 2, 3>;

double evaluate(const Quadratic& q, const Mat23& u) {
  return (u.transpose() * q.h * u).trace() - 2.0 * (q.b.cwiseProduct(u)).sum() + q.c;
}

Mat23 project_rows(Mat23 u, double r) {
  for (int g = 0; g < 2; ++g) {
    const double n = u.row(g).norm();
    if (n > r) u.row(g) *= r / n;
  }
  return u;
}

}  // namespace

double motion_objective(const RigidityModel& model, const DesiredMotion& desired, const Vec6& q) {
  double f = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double w = desired.weights[ii];
    if (w == 0.0) continue;
    const Vec3 r = model.coeff[0][i] * q.segment<3>(0) + model.coeff[1][i] * q.segment<3>(3) -
                   desired.velocities.segment<3>(3 * ii);
    f += w * r.squaredNorm();
  }
  return f;
}

Vec6 find_best_robot_motion(const RigidityModel& model, const DesiredMotion& desired, double v_max) {
  if (desired.weights.size() != static_cast<Eigen::Index>(model.size()) ||
      desired.velocities.size() != 3 * desired.weights.size()) {
    throw std::invalid_argument("find_best_robot_motion: dimension mismatch");
  }
  const Quadratic q = assemble(model, desired);
  Vec6 out = Vec6::Zero();
  if (q.h.cwiseAbs().maxCoeff() == 0.0) return out;

  // Minimum-norm unconstrained minimizer via the pseudo-inverse of the 2x2
  // coupling; exact whenever it already satisfies both speed caps.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(q.h);
  const double lmax = eig.eigenvalues().maxCoeff();
  Eigen::Matrix2d pinv = Eigen::Matrix2d::Zero();
  for (int k = 0; k < 2; ++k) {
    const double l = eig.eigenvalues()[k];
    if (l > 1e-12 * lmax) pinv += eig.eigenvectors().col(k) * eig.eigenvectors().col(k).transpose() / l;
  }
  Mat23 u = pinv * q.b;
  const bool feasible = u.row(0).norm() <= v_max && u.row(1).norm() <= v_max;
  if (!feasible) {
    // Accelerated projected gradient with adaptive restart on the
    // ball-constrained problem, warm-started from the projected minimizer.
    const double step = 1.0 / (2.0 * lmax);
    u = project_rows(u, v_max);
    Mat23 y = u;
    double t = 1.0;
    double f_prev = evaluate(q, u);
    for (int it = 0; it < 20000; ++it) {
      const Mat23 grad = 2.0 * (q.h * y - q.b);
      const Mat23 next = project_rows(y - step * grad, v_max);
      const double f_next = evaluate(q, next);
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double change = (next - u).norm();
      if (f_next > f_prev) {
        y = u;  // restart momentum
        t = 1.0;
        continue;
      }
      y = next + ((t - 1.0) / t_next) * (next - u);
      u = next;
      t = t_next;
      f_prev = f_next;
      if (change < 1e-15 * std::max(1.0, v_max)) break;
    }
  }
  out.segment<3>(0) = u.row(0).transpose();
  out.segment<3>(3) = u.row(1).transpose();
  return out;
}

Proximity proximity(const Vec3& center, double radius, const WorldGrid& grid) {
  Proximity p;
  p.distance = grid.sdf(center) - radius;
  const auto nearest = grid.nearest_obstacle(center);
  if (nearest.obstacle >= 0) {
    p.x_dot = nearest.normal;
  } else {
    const Vec3 g = grid.sdf_gradient(center);
    if (g.norm() > 1e-12) p.x_dot = g.normalized();
  }
  return p;
}

Vec6 obstacle_repulsion(const Vec6& q_dot, const Vec6& grippers, const WorldGrid& grid,
                        const ControllerParams& params) {
  Vec6 out;
  for (int g = 0; g < 2; ++g) {
    const Proximity p = proximity(grippers.segment<3>(3 * g), params.gripper_radius, grid);
    const double gamma = std::exp(-params.beta * std::max(p.distance, 0.0));
    // With J_p = I the null-space projector vanishes, leaving a convex blend
    // of the avoidance velocity and the commanded velocity.
    out.segment<3>(3 * g) = gamma * params.v_max_obs * p.x_dot + (1.0 - gamma) * q_dot.segment<3>(3 * g);
  }
  return out;
}

Vec6 controller_command(const std::vector<Vec3>& points, const Vec6& grippers, const Correspondences& corr,
                        const Eigen::MatrixXd& rest_distances, const RigidityModel& model, const WorldGrid& grid,
                        const ControllerParams& params) {
  if (corr.covered_count + corr.unreachable == corr.covered.size()) return Vec6::Zero();  // nothing to pursue
  const DesiredMotion e = follow_navigation_function(points, corr, grid);
  const DesiredMotion s = stretching_correction(points, rest_distances, params.lambda_s);
  const DesiredMotion d = combine_terms(e, s, params.lambda_w);
  const Vec6 q = find_best_robot_motion(model, d, params.v_max_ee);
  return obstacle_repulsion(q, grippers, grid, params);
}

ControlOutput local_controller(const std::vector<Vec3>& points, const Vec6& grippers,
                               const Eigen::MatrixXd& rest_distances, const RigidityModel& model,
                               const WorldGrid& grid, const TaskMatching& matching,
                               const ControllerParams& params) {
  ControlOutput out;
  out.correspondences = calculate_correspondences(points, grid, matching);
  out.command = controller_command(points, grippers, out.correspondences, rest_distances, model, grid, params);
  return out;
}

}  // namespace bandplan
