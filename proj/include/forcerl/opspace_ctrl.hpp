#pragma once

#include "forcerl/manip_model.hpp"
#include "forcerl/types.hpp"

namespace forcerl {

/// Gains of the hybrid motion/force torque law. sigma_motion / sigma_force
/// weight the joint-space position loop and the task force path; tau_null is
/// projected through the Jacobian-transpose nullspace.
struct HybridGains {
  Vec kqp;           // diagonal of K_qp, N m / rad
  Vec kqd;           // diagonal of K_qd, N m s / rad
  Vec sigma_motion;  // diagonal of Sigma_1, entries in [0,1]
  Vec sigma_force;   // diagonal of Sigma_2, entries in [0,1]
  Vec tau_null;      // N m

  static HybridGains defaults(int n, double kqp = 2.0, double kqd = 0.5, double s1 = 0.3,
                              double s2 = 1.0);
  void validate(int n) const;
};

/// Velocity-level contact constraint A(q) V = 0 with k independent rows.
struct PfaffianConstraint {
  Mat A;  // k x 6
  explicit PfaffianConstraint(Mat A_);
  int k() const { return static_cast<int>(A.rows()); }
};

/// Tolerance-thresholded pseudo-inverse of J^T (singular values below
/// 1e-6 * sigma_max are dropped).
Mat pinv_jt(const Mat& J);

/// I - J^T (J^T)^+, maps joint torques into the subspace producing no tool wrench.
Mat nullspace_projector(const Mat& J);

/// tau = g(q) + J^T F_tip + [I - J^T (J^T)^+] tau_null
Vec wrench_to_torque(const ManipulatorModel& model, const JointState& s, const Wrench& f_tip,
                     const Vec& tau_null);

/// Weak position loop wrapped around the wrench law. Uses the stabilizing
/// sign K_qp (q* - q) + K_qd (qd* - qd); gravity enters unweighted.
Vec hybrid_torque(const ManipulatorModel& model, const JointState& s, const Wrench& f_tip,
                  const Vec& q_des, const Vec& qd_des, const HybridGains& gains);

struct OpspaceDynamics {
  Mat6 lambda;  // task-space inertia, zero-padded outside active rows
  Vec6 eta;     // velocity-product terms
};

/// Task-space dynamics F = Lambda Vdot + eta over the model's active rows.
/// Throws TaskSingularity when the active Jacobian rows lose rank.
OpspaceDynamics opspace_dynamics(const ManipulatorModel& model, const JointState& s);

struct PfaffianDecomp {
  Vec lambda;       // k constraint intensities
  Wrench residual;  // component outside the column space of A^T
};

/// Least-squares split F = A^T lambda + residual with residual orthogonal to
/// the constraint rows.
PfaffianDecomp pfaffian_project(const PfaffianConstraint& constraint, const Wrench& f_tip);

/// A V; zero iff the twist satisfies the constraint.
Vec constraint_violation(const PfaffianConstraint& constraint, const Twist& v);

}  // namespace forcerl
