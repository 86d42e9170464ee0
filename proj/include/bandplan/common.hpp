#pragma once

#include <Eigen/Core>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace bandplan {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Both gripper centers packed as (g0.x, g0.y, g0.z, g1.x, g1.y, g1.z).
inline Vec3 gripper(const Vec6& q, int g) { return q.segment<3>(3 * g); }

inline Vec6 pack_grippers(const Vec3& a, const Vec3& b) {
  Vec6 q;
  q << a, b;
  return q;
}

/// Invalid scenario, parameters or geometry; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deformable object model is inconsistent (e.g. grasped nodes disconnected).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No point of the workspace reaches the requested obstacle clearance.
class WorkspaceSaturated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A band endpoint was asked to sit inside an obstacle.
class InvalidGripperTarget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Planning was requested with nothing left to do.
class TaskComplete : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bandplan
