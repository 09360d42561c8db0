#include "forcerl/manip_model.hpp"

#include <algorithm>
#include <cmath>

namespace forcerl {

namespace {

constexpr double kSubstep = 0.002;  // s, internal integration step
constexpr double kFdStep = 1e-6;

// Per-configuration frames of the chain. p[i] is the origin of joint i,
// p[n] the tool point; R[i] the orientation of link i; axis[i] the world
// rotation axis of joint i; com[i] the link COM.
struct FrameCache {
  std::vector<Eigen::Matrix3d> R;
  std::vector<Eigen::Vector3d> p;
  std::vector<Eigen::Vector3d> axis;
  std::vector<Eigen::Vector3d> com;
};

FrameCache compute_frames(const ManipulatorModel& model, const Vec& q) {
  const int n = model.n_joints();
  if (q.size() != n) throw DimensionMismatch("q length does not match n_joints");
  FrameCache f;
  f.R.resize(n);
  f.p.resize(n + 1);
  f.axis.resize(n);
  f.com.resize(n);
  Eigen::Matrix3d R_acc = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    f.p[i] = p;
    f.axis[i] = R_acc * model.joint_axes()[i];
    R_acc = R_acc * Eigen::AngleAxisd(q[i], model.joint_axes()[i]).toRotationMatrix();
    f.R[i] = R_acc;
    f.com[i] = p + R_acc * Eigen::Vector3d(model.links()[i].com_offset, 0, 0);
    p = p + R_acc * Eigen::Vector3d(model.links()[i].length, 0, 0);
  }
  f.p[n] = p;
  return f;
}

// 3 x n linear-velocity Jacobian of a point, columns limited to joints 0..last
Mat point_jacobian(const FrameCache& f, const Eigen::Vector3d& point, int last, int n) {
  Mat J = Mat::Zero(3, n);
  for (int k = 0; k <= last; ++k) J.col(k) = f.axis[k].cross(point - f.p[k]);
  return J;
}

Mat mass_matrix(const ManipulatorModel& model, const Vec& q) {
  const int n = model.n_joints();
  FrameCache f = compute_frames(model, q);
  Mat M = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const LinkParams& lk = model.links()[i];
    Mat Jv = point_jacobian(f, f.com[i], i, n);
    M.noalias() += lk.mass * Jv.transpose() * Jv;
    // isotropic link inertia: R I R^T = I, the angular term needs no rotation
    Mat Jw = Mat::Zero(3, n);
    for (int k = 0; k <= i; ++k) Jw.col(k) = f.axis[k];
    M.noalias() += lk.inertia * Jw.transpose() * Jw;
  }
  return 0.5 * (M + M.transpose());
}

}  // namespace

ManipulatorModel::ManipulatorModel(Embedding e, std::vector<LinkParams> links,
                                   std::vector<Eigen::Vector3d> axes, Eigen::Vector3d gravity,
                                   double torque_limit, double velocity_limit)
    : embedding_(e),
      links_(std::move(links)),
      joint_axes_(std::move(axes)),
      gravity_(gravity),
      velocity_limit_(velocity_limit) {
  if (!(velocity_limit_ > 0)) throw DimensionMismatch("velocity limit must be positive");
  if (links_.empty()) throw DimensionMismatch("model needs at least one link");
  for (const auto& lk : links_) {
    if (!(lk.length > 0) || !(lk.mass > 0))
      throw DimensionMismatch("link lengths and masses must be strictly positive");
    if (lk.inertia < 0) throw DimensionMismatch("link inertia must be nonnegative");
  }
  if (joint_axes_.size() != links_.size()) throw DimensionMismatch("one joint axis per link");
  for (auto& a : joint_axes_) {
    if (a.norm() < 1e-12) throw DimensionMismatch("joint axis must be nonzero");
    a.normalize();
  }
  torque_limits_ = Vec::Constant(static_cast<int>(links_.size()), torque_limit);
}

ManipulatorModel ManipulatorModel::planar(std::vector<LinkParams> links, Eigen::Vector3d gravity,
                                          double torque_limit, double velocity_limit) {
  std::vector<Eigen::Vector3d> axes(links.size(), Eigen::Vector3d::UnitZ());
  return ManipulatorModel(Embedding::kPlanar, std::move(links), std::move(axes), gravity,
                          torque_limit, velocity_limit);
}

ManipulatorModel ManipulatorModel::spatial(std::vector<LinkParams> links,
                                           std::vector<Eigen::Vector3d> joint_axes,
                                           Eigen::Vector3d gravity, double torque_limit,
                                           double velocity_limit) {
  return ManipulatorModel(Embedding::kSpatial, std::move(links), std::move(joint_axes), gravity,
                          torque_limit, velocity_limit);
}

double ManipulatorModel::reach() const {
  double r = 0;
  for (const auto& lk : links_) r += lk.length;
  return r;
}

std::vector<int> ManipulatorModel::active_task_rows() const {
  if (embedding_ == Embedding::kPlanar) return {0, 1, 5};
  return {0, 1, 2, 3, 4, 5};
}

EePose forward_kinematics(const ManipulatorModel& model, const Vec& q) {
  FrameCache f = compute_frames(model, q);
  EePose pose;
  pose.position = f.p[model.n_joints()];
  pose.rotation = f.R[model.n_joints() - 1];
  return pose;
}

Mat jacobian(const ManipulatorModel& model, const Vec& q) {
  const int n = model.n_joints();
  FrameCache f = compute_frames(model, q);
  Mat J = Mat::Zero(6, n);
  for (int k = 0; k < n; ++k) {
    J.block<3, 1>(0, k) = f.axis[k].cross(f.p[n] - f.p[k]);
    J.block<3, 1>(3, k) = f.axis[k];
  }
  return J;
}

double potential_energy(const ManipulatorModel& model, const Vec& q) {
  FrameCache f = compute_frames(model, q);
  double pe = 0;
  for (int i = 0; i < model.n_joints(); ++i)
    pe -= model.links()[i].mass * model.gravity().dot(f.com[i]);
  return pe;
}

double kinetic_energy(const ManipulatorModel& model, const JointState& s) {
  Mat M = mass_matrix(model, s.q);
  return 0.5 * s.qdot.dot(M * s.qdot);
}

Twist tool_twist(const ManipulatorModel& model, const JointState& s) {
  return jacobian(model, s.q) * s.qdot;
}

DynamicsTerms dynamics_terms(const ManipulatorModel& model, const JointState& s) {
  const int n = model.n_joints();
  if (s.q.size() != n) throw DimensionMismatch("state does not match n_joints");
  DynamicsTerms out;
  out.M = mass_matrix(model, s.q);
  if (Eigen::LLT<Mat>(out.M).info() != Eigen::Success)
    throw std::runtime_error("mass matrix Cholesky failed (model parameters degenerate)");

  // c_vec = Mdot qd - 1/2 d/dq (qd^T M qd); both pieces from central differences
  // of the mass matrix, exact at qd = 0.
  out.c_vec = Vec::Zero(n);
  if (s.qdot.squaredNorm() > 0) {
    Mat Mdot = (mass_matrix(model, s.q + kFdStep * s.qdot) -
                mass_matrix(model, s.q - kFdStep * s.qdot)) /
               (2 * kFdStep);
    Vec grad(n);
    for (int k = 0; k < n; ++k) {
      Vec qp = s.q, qm = s.q;
      qp[k] += kFdStep;
      qm[k] -= kFdStep;
      grad[k] = (s.qdot.dot(mass_matrix(model, qp) * s.qdot) -
                 s.qdot.dot(mass_matrix(model, qm) * s.qdot)) /
                (2 * kFdStep);
    }
    out.c_vec = Mdot * s.qdot - 0.5 * grad;
  }

  FrameCache f = compute_frames(model, s.q);
  out.g_vec = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    Mat Jv = point_jacobian(f, f.com[i], i, n);
    out.g_vec.noalias() -= model.links()[i].mass * Jv.transpose() * model.gravity();
  }
  return out;
}

JointState forward_simulate(const ManipulatorModel& model, const JointState& s, const Vec& tau,
                            const Wrench& external_world, double dt, int* clamp_events) {
  const int n = model.n_joints();
  if (tau.size() != n) throw DimensionMismatch("tau length does not match n_joints");
  if (!tau.allFinite()) throw DimensionMismatch("non-finite torque rejected");
  if (!(dt > 0)) throw DimensionMismatch("dt must be positive");

  Vec tau_c = tau;
  for (int i = 0; i < n; ++i) {
    double lim = model.torque_limits()[i];
    if (std::abs(tau[i]) > lim) {
      tau_c[i] = std::clamp(tau[i], -lim, lim);
      if (clamp_events) ++(*clamp_events);
    }
  }

  const int n_sub = std::max(1, static_cast<int>(std::llround(dt / kSubstep)));
  const double h = dt / n_sub;
  JointState out = s;
  for (int k = 0; k < n_sub; ++k) {
    DynamicsTerms dyn = dynamics_terms(model, out);
    Vec ext = Vec::Zero(n);
    if (external_world.squaredNorm() > 0)
      ext.noalias() = jacobian(model, out.q).transpose() * external_world;
    Eigen::LDLT<Mat> Mf(dyn.M);
    Vec qddot = Mf.solve(tau_c + ext - dyn.c_vec - dyn.g_vec);
    if (out.qdot.squaredNorm() > 0) {
      // re-evaluate the velocity-dependent term at the half-step velocity;
      // keeps the 0.1%/1000-step energy budget at the fixed 2 ms substep
      JointState mid(out.q, out.qdot + 0.5 * h * qddot);
      qddot = Mf.solve(tau_c + ext - dynamics_terms(model, mid).c_vec - dyn.g_vec);
    }
    out.qdot += h * qddot;
    const double vl = model.velocity_limit();
    out.qdot = out.qdot.cwiseMax(-vl).cwiseMin(vl);
    out.q += h * out.qdot;
  }
  return out;
}

IkResult inverse_kinematics(const ManipulatorModel& model, const EePose& target, const Vec& seed) {
  const int n = model.n_joints();
  if (seed.size() != n) throw DimensionMismatch("seed length does not match n_joints");
  constexpr int kMaxIters = 200;
  constexpr double kTol = 1e-6;
  constexpr double kDamping = 1e-3;

  auto task_error = [&](const Vec& q) -> Vec6 {
    EePose cur = forward_kinematics(model, q);
    Vec6 e;
    e.head<3>() = target.position - cur.position;
    Eigen::AngleAxisd aa(target.rotation * cur.rotation.transpose());
    e.tail<3>() = aa.angle() * aa.axis();
    return e;
  };

  Vec q = seed;
  Vec best_q = q;
  double best_err = task_error(q).norm();
  int it = 0;
  while (best_err >= kTol && it < kMaxIters) {
    ++it;
    Vec6 e = task_error(q);
    Mat J = jacobian(model, q);
    Mat JJt = J * J.transpose() + kDamping * kDamping * Mat::Identity(6, 6);
    Vec dq = J.transpose() * JJt.ldlt().solve(e);
    double step = dq.norm();
    if (step > 0.5) dq *= 0.5 / step;
    q += dq;
    double err = task_error(q).norm();
    if (err < best_err) {
      best_err = err;
      best_q = q;
    }
  }
  return IkResult{best_q, best_err, best_err < kTol, it};
}

}  // namespace forcerl
