#include "forcerl/opspace_ctrl.hpp"
#include "forcerl/rng.hpp"

#include <doctest.h>

using namespace forcerl;

namespace {

ManipulatorModel planar_links(int n) {
  std::vector<LinkParams> links;
  double l0 = 0.35;
  for (int i = 0; i < n; ++i) {
    double l = l0 - 0.05 * i;
    double m = 4.0 * l;
    links.push_back({l, m, l / 2, m * l * l / 12.0});
  }
  return ManipulatorModel::planar(links);
}

}  // namespace

TEST_CASE("wrench_to_torque reduces to gravity compensation at zero input") {
  auto model = planar_links(3);
  RngStream rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    JointState s(rng.gaussian_vec(3), rng.gaussian_vec(3));
    Vec tau = wrench_to_torque(model, s, Wrench::Zero(), Vec::Zero(3));
    Vec g = dynamics_terms(model, JointState(s.q, Vec::Zero(3))).g_vec;
    CHECK((tau - g).norm() < 1e-12);
  }
}

TEST_CASE("square nonsingular task Jacobian kills the nullspace projector") {
  // planar 3-link: three active task rows against three joints
  auto model = planar_links(3);
  Vec q(3);
  q << 0.4, -0.7, 0.5;
  Mat N = nullspace_projector(jacobian(model, q));
  CHECK(N.cwiseAbs().maxCoeff() < 1e-9);

  JointState s(q, Vec::Zero(3));
  Vec tau_null(3);
  tau_null << 3.0, -1.0, 2.0;
  Vec with = wrench_to_torque(model, s, Wrench::Zero(), tau_null);
  Vec without = wrench_to_torque(model, s, Wrench::Zero(), Vec::Zero(3));
  CHECK((with - without).norm() < 1e-8);
}

TEST_CASE("nullspace projector identities on a redundant arm") {
  auto model = planar_links(4);
  RngStream rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    Vec q = rng.gaussian_vec(4);
    Mat J = jacobian(model, q);
    Mat N = nullspace_projector(J);
    Mat JTp = pinv_jt(J);
    CHECK((N * N - N).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((JTp * N).cwiseAbs().maxCoeff() <= 1e-10);

    // nullspace torques produce no least-squares tool wrench
    Vec tau_null = rng.gaussian_vec(4);
    CHECK((JTp * (N * tau_null)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(N.cwiseAbs().maxCoeff() > 1e-3);  // genuinely nontrivial here
  }
}

TEST_CASE("hybrid law degenerates to the wrench law and holds equilibrium") {
  auto model = planar_links(3);
  RngStream rng(47);
  JointState s(rng.gaussian_vec(3), rng.gaussian_vec(3));
  Wrench f = Wrench::Zero();
  f << 4.0, -2.0, 0, 0, 0, 1.0;

  HybridGains gains = HybridGains::defaults(3);
  gains.sigma_motion.setZero();
  gains.sigma_force.setOnes();
  Vec tau = hybrid_torque(model, s, f, s.q, s.qdot, gains);
  CHECK((tau - wrench_to_torque(model, s, f, Vec::Zero(3))).norm() < 1e-12);

  gains = HybridGains::defaults(3);
  Vec tau_eq = hybrid_torque(model, s, Wrench::Zero(), s.q, s.qdot, gains);
  Vec g = dynamics_terms(model, JointState(s.q, Vec::Zero(3))).g_vec;
  CHECK((tau_eq - g).norm() < 1e-12);
}

TEST_CASE("hybrid law is linear in wrench and nullspace torque") {
  auto model = planar_links(4);
  RngStream rng(53);
  JointState s(rng.gaussian_vec(4), rng.gaussian_vec(4));
  Vec q_des = rng.gaussian_vec(4);
  HybridGains gains = HybridGains::defaults(4);
  auto law = [&](const Wrench& f, const Vec& tn) {
    HybridGains g2 = gains;
    g2.tau_null = tn;
    return hybrid_torque(model, s, f, q_des, Vec::Zero(4), g2);
  };
  for (int trial = 0; trial < 20; ++trial) {
    Wrench f1 = Wrench::Zero(), f2 = Wrench::Zero();
    f1 << rng.gaussian_vec(6);
    f2 << rng.gaussian_vec(6);
    Vec t1 = rng.gaussian_vec(4), t2 = rng.gaussian_vec(4);
    double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    Vec lhs = law(a * f1 + b * f2, a * t1 + b * t2);
    Vec zero = law(Wrench::Zero(), Vec::Zero(4));
    Vec rhs = a * (law(f1, t1) - zero) + b * (law(f2, t2) - zero) + zero;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("weak position loop converges in free space") {
  auto model = planar_links(3);
  Vec q_des(3);
  q_des << 0.5, -0.9, 0.6;
  JointState s(q_des + Vec::Constant(3, 0.1), Vec::Zero(3));
  HybridGains gains = HybridGains::defaults(3, 2.0, 1.5, 1.0, 0.0);
  // the torque law runs at the inner 2 ms rate, like the robot's own loop
  for (int step = 0; step < 2500; ++step) {  // 5 s
    Vec tau = hybrid_torque(model, s, Wrench::Zero(), q_des, Vec::Zero(3), gains);
    s = forward_simulate(model, s, tau, Wrench::Zero(), 0.002);
  }
  CHECK((s.q - q_des).cwiseAbs().maxCoeff() < 5e-3);
}

TEST_CASE("opspace dynamics reduce correctly at rest and stay consistent") {
  auto model = planar_links(3);
  Vec q(3);
  q << 0.4, -0.8, 0.9;

  auto rest = opspace_dynamics(model, JointState(q, Vec::Zero(3)));
  CHECK(rest.eta.norm() == 0.0);

  // lambda symmetric positive definite on the active rows
  RngStream rng(59);
  for (int trial = 0; trial < 50; ++trial) {
    Vec qr = 0.3 * rng.gaussian_vec(3);
    qr[1] -= 1.0;  // keep away from the stretched singularity
    auto ops = opspace_dynamics(model, JointState(qr, Vec::Zero(3)));
    Mat la(3, 3);
    const int rows[3] = {0, 1, 5};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) la(i, j) = ops.lambda(rows[i], rows[j]);
    CHECK((la - la.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<Mat> es(la);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("opspace dynamics match joint-space simulation") {
  auto model = planar_links(3);
  RngStream rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    Vec q = 0.3 * rng.gaussian_vec(3);
    q[1] -= 1.0;
    Vec qd = 0.5 * rng.gaussian_vec(3);
    JointState s(q, qd);
    Vec tau = rng.gaussian_vec(3);

    DynamicsTerms dyn = dynamics_terms(model, s);
    Vec qdd = dyn.M.ldlt().solve(tau - dyn.c_vec - dyn.g_vec);

    Mat J = jacobian(model, q);
    const double h = 1e-6;
    Mat Jdot = (jacobian(model, q + h * qd) - jacobian(model, q - h * qd)) / (2 * h);
    Twist vdot = J * qdd + Jdot * qd;

    auto ops = opspace_dynamics(model, s);
    const int rows[3] = {0, 1, 5};
    Mat Ja(3, 3);
    Vec vdot_a(3), eta_a(3);
    for (int i = 0; i < 3; ++i) {
      Ja.row(i) = J.row(rows[i]);
      vdot_a[i] = vdot[rows[i]];
      eta_a[i] = ops.eta[rows[i]];
    }
    Mat la(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) la(i, j) = ops.lambda(rows[i], rows[j]);

    Vec f_task = Ja.transpose().fullPivLu().solve(tau - dyn.g_vec);
    CHECK((f_task - (la * vdot_a + eta_a)).norm() <= 1e-3);
  }
}

TEST_CASE("opspace dynamics flags task singularities") {
  auto model = planar_links(3);
  Vec q = Vec::Zero(3);  // fully stretched: translational rows lose rank
  CHECK_THROWS_AS(opspace_dynamics(model, JointState(q, Vec::Zero(3))), TaskSingularity);
}

TEST_CASE("pfaffian projection splits aligned and orthogonal wrenches") {
  Mat A(1, 6);
  A << 0, 0, 1, 0, 0, 0;
  PfaffianConstraint c(A);
  Wrench f = Wrench::Zero();
  f[2] = 5.0;
  auto d = pfaffian_project(c, f);
  CHECK(d.lambda[0] == doctest::Approx(5.0));
  CHECK(d.residual.norm() <= 1e-12);

  Wrench orth = Wrench::Zero();
  orth << 1.0, -2.0, 0, 0.5, 0, 3.0;
  d = pfaffian_project(c, orth);
  CHECK(d.lambda.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((d.residual - orth).norm() <= 1e-12);
}

TEST_CASE("pfaffian projection reconstructs constructed decompositions") {
  RngStream rng(67);
  for (int trial = 0; trial < 50; ++trial) {
    Mat A(2, 6);
    for (int i = 0; i < 12; ++i) A(i / 6, i % 6) = rng.gaussian();
    PfaffianConstraint c(A);
    Vec lam(2);
    lam << 3.0, -1.0;
    Wrench f = A.transpose() * lam;
    auto d = pfaffian_project(c, f);
    CHECK((d.lambda - lam).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(d.residual.cwiseAbs().maxCoeff() <= 1e-10);

    // reconstruction + orthogonality on arbitrary wrenches
    Wrench g = Wrench::Zero();
    g << rng.gaussian_vec(6);
    d = pfaffian_project(c, g);
    CHECK((A.transpose() * d.lambda + d.residual - g).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(std::abs((A.transpose() * d.lambda).dot(d.residual)) <= 1e-10);
  }
}

TEST_CASE("constraint violation is A V") {
  Mat A(2, 6);
  A << 0, 1, 0, 0, 0, 0,  // forbids vertical translation
      0, 0, 0, 0, 0, 1;   // forbids planar rotation
  PfaffianConstraint c(A);
  CHECK(constraint_violation(c, Twist::Zero()).norm() == 0.0);
  Twist horizontal = Twist::Zero();
  horizontal[0] = 2.0;
  CHECK(constraint_violation(c, horizontal).norm() == 0.0);
  Twist bad = Twist::Zero();
  bad[1] = 0.4;
  CHECK(constraint_violation(c, bad)[0] == doctest::Approx(0.4));
}

TEST_CASE("rank deficient constraints are rejected") {
  Mat A(2, 6);
  A.row(0) << 1, 0, 0, 0, 0, 0;
  A.row(1) << 2, 0, 0, 0, 0, 0;
  CHECK_THROWS_AS(PfaffianConstraint{A}, RankDeficient);
}
