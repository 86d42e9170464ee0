#pragma once

#include "bandplan/deform.hpp"
#include "bandplan/worldgrid.hpp"

#include <Eigen/Core>

#include <array>
#include <utility>
#include <vector>

namespace bandplan {

enum class CorrespondenceMode { Coverage, Fixed };

/// How targets are matched to object points and when they count as covered.
struct TaskMatching {
  CorrespondenceMode mode = CorrespondenceMode::Coverage;
  std::vector<std::size_t> fixed_points;  // Fixed mode: object point per target
  double cover_threshold = 0.04;
};

struct Correspondences {
  /// Per object point: (target id, navigation distance) of assigned targets.
  std::vector<std::vector<std::pair<std::size_t, double>>> per_point;
  std::vector<char> covered;     // per target
  std::size_t covered_count = 0;
  std::size_t unreachable = 0;   // uncovered targets no point can reach
  double error = 0.0;            // task error: summed distance of uncovered targets

  std::vector<std::size_t> uncovered() const;
};

struct DesiredMotion {
  Eigen::VectorXd velocities;  // 3P
  Eigen::VectorXd weights;     // P

  static DesiredMotion zeros(std::size_t points);
  Vec3 velocity(std::size_t i) const { return velocities.segment<3>(3 * i); }
};

struct ControllerParams {
  double v_max_ee = 0.2;    // per-gripper speed cap (m/s)
  double v_max_obs = 0.2;   // obstacle avoidance speed (m/s)
  double beta = 200.0;      // obstacle avoidance scale (1/m)
  double lambda_s = 1.17;   // stretch factor
  double lambda_w = 2000.0; // stretching weight
  double jacobian_decay = 10.0;  // 1/m, diminishing-rigidity decay k
  double gripper_radius = 0.025;

  void validate() const;
};

/// Diminishing-rigidity coupling: point i moves with exp(-k * geodesic(i, g))
/// times the velocity of gripper g.
struct RigidityModel {
  std::array<std::vector<double>, 2> coeff;

  static RigidityModel from_geodesics(const std::array<std::vector<double>, 2>& geodesics, double k);
  static RigidityModel from_deform(const DeformConfig& flat, double k);
  std::size_t size() const { return coeff[0].size(); }
};

Correspondences calculate_correspondences(const std::vector<Vec3>& points, const WorldGrid& grid,
                                          const TaskMatching& matching);

DesiredMotion follow_navigation_function(const std::vector<Vec3>& points, const Correspondences& corr,
                                         const WorldGrid& grid);

DesiredMotion stretching_correction(const std::vector<Vec3>& points, const Eigen::MatrixXd& rest_distances,
                                    double lambda_s);

DesiredMotion combine_terms(const DesiredMotion& e, const DesiredMotion& s, double lambda_w);

/// Weighted objective sum_i w_i |J_i q - v_i|^2 of a gripper motion q.
double motion_objective(const RigidityModel& model, const DesiredMotion& desired, const Vec6& q);

/// Minimizes motion_objective subject to |q_g| <= v_max for each gripper.
Vec6 find_best_robot_motion(const RigidityModel& model, const DesiredMotion& desired, double v_max);

struct Proximity {
  Eigen::Matrix3d jacobian = Eigen::Matrix3d::Identity();
  Vec3 x_dot = Vec3::UnitZ();  // unit direction away from the closest obstacle
  double distance = kFreeSpaceDistance;  // sdf(center) - radius
};

Proximity proximity(const Vec3& center, double radius, const WorldGrid& grid);

/// Blends each gripper command with a push away from the nearest obstacle.
Vec6 obstacle_repulsion(const Vec6& q_dot, const Vec6& grippers, const WorldGrid& grid,
                        const ControllerParams& params);

struct ControlOutput {
  Vec6 command = Vec6::Zero();
  Correspondences correspondences;
};

/// Gripper command for precomputed correspondences.
Vec6 controller_command(const std::vector<Vec3>& points, const Vec6& grippers, const Correspondences& corr,
                        const Eigen::MatrixXd& rest_distances, const RigidityModel& model, const WorldGrid& grid,
                        const ControllerParams& params);

/// Correspondences -> navigation term -> stretching correction -> combination
/// -> bounded least squares -> obstacle repulsion.
ControlOutput local_controller(const std::vector<Vec3>& points, const Vec6& grippers,
                               const Eigen::MatrixXd& rest_distances, const RigidityModel& model,
                               const WorldGrid& grid, const TaskMatching& matching,
                               const ControllerParams& params);

}  // namespace bandplan
