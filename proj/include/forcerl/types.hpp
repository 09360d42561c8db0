#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace forcerl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Wrench [Fx,Fy,Fz,Mx,My,Mz]; Twist [vx,vy,vz,wx,wy,wz]. Planar problems
// populate components {0,1,5} and keep the remaining rows at zero.
using Wrench = Vec6;
using Twist = Vec6;

inline constexpr int kPlanarRows[3] = {0, 1, 5};

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct Unreachable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TaskSingularity : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RankDeficient : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotPositiveDefinite : std::runtime_error {
  int t;
  explicit NotPositiveDefinite(int t_)
      : std::runtime_error("Q_uu not positive definite at t=" + std::to_string(t_)), t(t_) {}
};
struct DivergenceAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct JointState {
  Vec q;
  Vec qdot;

  JointState() = default;
  JointState(Vec q_, Vec qdot_) : q(std::move(q_)), qdot(std::move(qdot_)) {
    if (q.size() != qdot.size() || q.size() < 1)
      throw DimensionMismatch("JointState: q and qdot must have equal length >= 1");
    if (!q.allFinite() || !qdot.allFinite())
      throw DimensionMismatch("JointState: entries must be finite");
  }
  int dof() const { return static_cast<int>(q.size()); }
};

struct EePose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  double planar_angle() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

  static EePose planar(double x, double y, double theta) {
    EePose p;
    p.position = {x, y, 0.0};
    p.rotation = Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    return p;
  }
};

}  // namespace forcerl
