#include "forcerl/opspace_ctrl.hpp"

#include <Eigen/SVD>

namespace forcerl {

namespace {

constexpr double kSvdRelTol = 1e-6;

Mat pinv(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double tol = sv.size() ? kSvdRelTol * sv[0] : 0.0;
  Vec inv = Vec::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) inv[i] = 1.0 / sv[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

HybridGains HybridGains::defaults(int n, double kqp, double kqd, double s1, double s2) {
  HybridGains g;
  g.kqp = Vec::Constant(n, kqp);
  g.kqd = Vec::Constant(n, kqd);
  g.sigma_motion = Vec::Constant(n, s1);
  g.sigma_force = Vec::Constant(n, s2);
  g.tau_null = Vec::Zero(n);
  return g;
}

void HybridGains::validate(int n) const {
  auto len = [n](const Vec& v) { return v.size() == n; };
  if (!len(kqp) || !len(kqd) || !len(sigma_motion) || !len(sigma_force) || !len(tau_null))
    throw DimensionMismatch("HybridGains: vector lengths must equal n_joints");
  if (kqp.minCoeff() < 0 || kqd.minCoeff() < 0)
    throw DimensionMismatch("HybridGains: gains must be nonnegative");
  if (sigma_motion.minCoeff() < 0 || sigma_motion.maxCoeff() > 1 || sigma_force.minCoeff() < 0 ||
      sigma_force.maxCoeff() > 1)
    throw DimensionMismatch("HybridGains: sigma weights must lie in [0,1]");
}

PfaffianConstraint::PfaffianConstraint(Mat A_) : A(std::move(A_)) {
  if (A.cols() != 6 || A.rows() < 1) throw DimensionMismatch("constraint matrix must be k x 6");
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& sv = svd.singularValues();
  if (sv[sv.size() - 1] <= kSvdRelTol * sv[0])
    throw RankDeficient("constraint rows are linearly dependent");
}

Mat pinv_jt(const Mat& J) { return pinv(J.transpose()); }

Mat nullspace_projector(const Mat& J) {
  const int n = static_cast<int>(J.cols());
  return Mat::Identity(n, n) - J.transpose() * pinv_jt(J);
}

Vec wrench_to_torque(const ManipulatorModel& model, const JointState& s, const Wrench& f_tip,
                     const Vec& tau_null) {
  if (tau_null.size() != model.n_joints())
    throw DimensionMismatch("tau_null length must equal n_joints");
  if (!f_tip.allFinite()) throw DimensionMismatch("wrench must be finite");
  Mat J = jacobian(model, s.q);
  Vec g = dynamics_terms(model, JointState(s.q, Vec::Zero(model.n_joints()))).g_vec;
  return g + J.transpose() * f_tip + nullspace_projector(J) * tau_null;
}

Vec hybrid_torque(const ManipulatorModel& model, const JointState& s, const Wrench& f_tip,
                  const Vec& q_des, const Vec& qd_des, const HybridGains& gains) {
  const int n = model.n_joints();
  gains.validate(n);
  if (q_des.size() != n || qd_des.size() != n)
    throw DimensionMismatch("desired joint vectors must have length n_joints");
  if (!f_tip.allFinite()) throw DimensionMismatch("wrench must be finite");
  Mat J = jacobian(model, s.q);
  Vec g = dynamics_terms(model, JointState(s.q, Vec::Zero(n))).g_vec;
  Vec servo = gains.kqp.cwiseProduct(q_des - s.q) + gains.kqd.cwiseProduct(qd_des - s.qdot);
  return gains.sigma_motion.cwiseProduct(servo) +
         gains.sigma_force.cwiseProduct(J.transpose() * f_tip) +
         nullspace_projector(J) * gains.tau_null + g;
}

OpspaceDynamics opspace_dynamics(const ManipulatorModel& model, const JointState& s) {
  const std::vector<int> rows = model.active_task_rows();
  const int r = static_cast<int>(rows.size());
  const int n = model.n_joints();

  Mat J = jacobian(model, s.q);
  Mat Ja(r, n);
  for (int i = 0; i < r; ++i) Ja.row(i) = J.row(rows[i]);

  Eigen::JacobiSVD<Mat> svd(Ja);
  const auto& sv = svd.singularValues();
  if (sv[sv.size() - 1] <= kSvdRelTol * sv[0])
    throw TaskSingularity("active Jacobian rows are rank deficient");

  Mat Ja_pinv = pinv(Ja);  // n x r
  DynamicsTerms dyn = dynamics_terms(model, s);
  Mat lambda_a = Ja_pinv.transpose() * dyn.M * Ja_pinv;

  // task twist restricted to active rows, qd consistent with it
  Twist v_full = J * s.qdot;
  Vec va(r);
  for (int i = 0; i < r; ++i) va[i] = v_full[rows[i]];
  Vec qd_task = Ja_pinv * va;

  // Jdot by central difference along qd, step 1e-6
  Vec eta_a = Vec::Zero(r);
  if (s.qdot.squaredNorm() > 0) {
    const double h = 1e-6;
    Mat Jp = jacobian(model, s.q + h * s.qdot);
    Mat Jm = jacobian(model, s.q - h * s.qdot);
    Mat Jdot_a(r, n);
    for (int i = 0; i < r; ++i) Jdot_a.row(i) = (Jp.row(rows[i]) - Jm.row(rows[i])) / (2 * h);
    Vec c_task = dynamics_terms(model, JointState(s.q, qd_task)).c_vec;
    eta_a = Ja_pinv.transpose() * c_task - lambda_a * (Jdot_a * Ja_pinv * va);
  }

  OpspaceDynamics out;
  out.lambda = Mat6::Zero();
  out.eta = Vec6::Zero();
  for (int i = 0; i < r; ++i) {
    out.eta[rows[i]] = eta_a[i];
    for (int j = 0; j < r; ++j) out.lambda(rows[i], rows[j]) = lambda_a(i, j);
  }
  return out;
}

PfaffianDecomp pfaffian_project(const PfaffianConstraint& constraint, const Wrench& f_tip) {
  const Mat& A = constraint.A;
  Eigen::LDLT<Mat> fac(A * A.transpose());
  if (fac.info() != Eigen::Success || fac.isNegative())
    throw RankDeficient("A A^T is not invertible");
  PfaffianDecomp out;
  out.lambda = fac.solve(A * f_tip);
  out.residual = f_tip - A.transpose() * out.lambda;
  return out;
}

Vec constraint_violation(const PfaffianConstraint& constraint, const Twist& v) {
  return constraint.A * v;
}

}  // namespace forcerl
