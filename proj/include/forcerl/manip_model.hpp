#pragma once

#include "forcerl/types.hpp"

#include <vector>

namespace forcerl {

enum class Embedding { kPlanar, kSpatial };

struct LinkParams {
  double length;      // m
  double mass;        // kg
  double com_offset;  // m, along the link axis from its joint
  double inertia;     // kg m^2, isotropic about the COM
};

/// Immutable description of a serial revolute-joint arm. Planar models are a
/// chain in the vertical x-y plane rotating about z; spatial models take a
/// per-joint rotation axis expressed in the parent link frame. Immutability
/// makes a model safe to share across concurrent rollouts.
class ManipulatorModel {
 public:
  static ManipulatorModel planar(std::vector<LinkParams> links,
                                 Eigen::Vector3d gravity = {0.0, -9.81, 0.0},
                                 double torque_limit = 50.0, double velocity_limit = 6.0);
  static ManipulatorModel spatial(std::vector<LinkParams> links,
                                  std::vector<Eigen::Vector3d> joint_axes,
                                  Eigen::Vector3d gravity = {0.0, 0.0, -9.81},
                                  double torque_limit = 50.0, double velocity_limit = 6.0);

  int n_joints() const { return static_cast<int>(links_.size()); }
  Embedding embedding() const { return embedding_; }
  const std::vector<LinkParams>& links() const { return links_; }
  const Eigen::Vector3d& gravity() const { return gravity_; }
  const Vec& torque_limits() const { return torque_limits_; }
  double velocity_limit() const { return velocity_limit_; }
  const std::vector<Eigen::Vector3d>& joint_axes() const { return joint_axes_; }
  double reach() const;

  // task rows carrying motion: {0,1,5} planar, all six spatial
  std::vector<int> active_task_rows() const;

 private:
  ManipulatorModel(Embedding e, std::vector<LinkParams> links,
                   std::vector<Eigen::Vector3d> axes, Eigen::Vector3d gravity,
                   double torque_limit, double velocity_limit);

  Embedding embedding_;
  std::vector<LinkParams> links_;
  std::vector<Eigen::Vector3d> joint_axes_;  // unit, in parent link frame
  Eigen::Vector3d gravity_;
  Vec torque_limits_;
  double velocity_limit_;
};

struct DynamicsTerms {
  Mat M;      // n x n, symmetric positive definite
  Vec c_vec;  // C(q,qd) * qd
  Vec g_vec;  // gradient of potential energy
};

EePose forward_kinematics(const ManipulatorModel& model, const Vec& q);

/// 6 x n world-frame Jacobian at the tool point, V = J(q) qdot.
Mat jacobian(const ManipulatorModel& model, const Vec& q);

DynamicsTerms dynamics_terms(const ManipulatorModel& model, const JointState& s);

double potential_energy(const ManipulatorModel& model, const Vec& q);
double kinetic_energy(const ManipulatorModel& model, const JointState& s);
Twist tool_twist(const ManipulatorModel& model, const JointState& s);

/// Semi-implicit Euler with fixed 2 ms substeps; torques are clamped to the
/// model limits before integration (clamp events counted if requested) and
/// joint velocities saturate at the model's servo limit.
/// `external_world` is a wrench acting at the tool point, world frame.
JointState forward_simulate(const ManipulatorModel& model, const JointState& s, const Vec& tau,
                            const Wrench& external_world, double dt, int* clamp_events = nullptr);

struct IkResult {
  Vec q;
  double residual;
  bool converged;
  int iterations;
};

/// Damped-least-squares IK; iterates until task error < 1e-6 or 200 rounds and
/// returns the best configuration found together with the achieved residual.
IkResult inverse_kinematics(const ManipulatorModel& model, const EePose& target, const Vec& seed);

}  // namespace forcerl
