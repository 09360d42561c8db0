#include "forcerl/contact_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace forcerl {

namespace {

constexpr double kSubstep = 0.002;

struct Exit {
  double dist;
  Eigen::Vector2d dir;
};

// Minimal translation taking a point out of the floor-with-slot solid.
// Returns nullopt when the point is in free space.
std::optional<Exit> solid_exit(const HoleGeometry& g, const Eigen::Vector2d& p) {
  const double yf = g.center.y();
  const double yb = yf - g.depth;
  const double xl = g.center.x() - 0.5 * g.hole_width();
  const double xr = g.center.x() + 0.5 * g.hole_width();

  if (p.y() >= yf) return std::nullopt;
  const bool in_span = p.x() > xl && p.x() < xr;
  if (in_span && p.y() > yb) return std::nullopt;  // inside the cavity

  Exit best{yf - p.y(), {0.0, 1.0}};  // up through the floor surface
  if (in_span) {
    best = Exit{yb - p.y(), {0.0, 1.0}};  // up into the cavity
  } else if (p.y() > yb) {
    // sideways through a cavity wall
    if (p.x() <= xl && xl - p.x() < best.dist) best = Exit{xl - p.x(), {1.0, 0.0}};
    if (p.x() >= xr && p.x() - xr < best.dist) best = Exit{p.x() - xr, {-1.0, 0.0}};
  } else {
    // below the cavity bottom: nearest free space may be a bottom corner
    for (double cx : {xl, xr}) {
      Eigen::Vector2d corner(cx, yb);
      double d = (corner - p).norm();
      if (d < best.dist && d > 1e-12) best = Exit{d, (corner - p) / d};
    }
  }
  return best;
}

// Three contact faces (tip and both flanks), each sampled with trapezoid
// weights summing to one so a uniform face press produces exactly k_wall*d.
// Flank sampling stops short of the tip corners, which belong to the tip face.
std::vector<BoundaryPoint> peg_boundary_points(const HoleGeometry& g) {
  std::vector<BoundaryPoint> pts;
  auto add_face = [&pts, &g](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const int m = std::max(1, static_cast<int>(std::ceil((b - a).norm() / g.sample_spacing)));
    for (int i = 0; i <= m; ++i) {
      double t = static_cast<double>(i) / m;
      double w = (i == 0 || i == m) ? 0.5 / m : 1.0 / m;
      pts.push_back({a + t * (b - a), w});
    }
  };
  const double hw = 0.5 * g.peg_width;
  const double L = g.peg_length;
  const double trim = 0.5 * g.sample_spacing;
  add_face({L, -hw}, {L, hw});                    // tip face, owns the corners
  add_face({0.0, -hw}, {L - trim, -hw});          // flanks
  add_face({0.0, hw}, {L - trim, hw});
  return pts;
}

// World-frame contact wrench acting on the peg, reduced to the tool point.
// When friction_cap > 0 the tangential force is additionally limited to
// friction_cap * |v_t|, the largest value an explicit integrator can apply
// without reversing the slip within one substep.
Wrench contact_wrench_world(const HoleGeometry& g, const std::vector<BoundaryPoint>& shape,
                            const EePose& pose, const Twist& twist, double friction_cap = 0.0) {
  const double theta = pose.planar_angle();
  const Eigen::Rotation2Dd rot(theta);
  const Eigen::Vector2d tool(pose.position.x(), pose.position.y());
  const Eigen::Vector2d v_tool(twist[0], twist[1]);
  const double omega = twist[5];

  Eigen::Vector2d force = Eigen::Vector2d::Zero();
  double moment = 0.0;
  for (const auto& bp : shape) {
    Eigen::Vector2d r = rot * bp.p;
    Eigen::Vector2d p = tool + r;
    auto exit = solid_exit(g, p);
    if (!exit) continue;
    Eigen::Vector2d v = v_tool + omega * Eigen::Vector2d(-r.y(), r.x());
    double separation = v.dot(exit->dir);
    double fn = bp.w * std::max(0.0, g.k_wall * exit->dist - g.damping * separation);
    Eigen::Vector2d tangent(-exit->dir.y(), exit->dir.x());
    double vt = v.dot(tangent);
    double ft_mag = g.mu * fn * std::min(std::abs(vt) / g.slip_band, 1.0);
    if (friction_cap > 0) ft_mag = std::min(ft_mag, friction_cap * std::abs(vt));
    double ft = -std::copysign(ft_mag, vt);
    Eigen::Vector2d f = fn * exit->dir + ft * tangent;
    force += f;
    moment += r.x() * f.y() - r.y() * f.x();
  }
  Wrench w = Wrench::Zero();
  w[0] = force.x();
  w[1] = force.y();
  w[5] = moment;
  return w;
}

Wrench world_to_tool(const Wrench& w, double theta) {
  Eigen::Rotation2Dd rot(-theta);
  Eigen::Vector2d f = rot * Eigen::Vector2d(w[0], w[1]);
  Wrench out = w;
  out[0] = f.x();
  out[1] = f.y();
  return out;
}

}  // namespace

void HoleGeometry::validate() const {
  if (!(clearance > 0.0) || clearance > 0.05)
    throw DimensionMismatch("clearance must lie in (0, 0.05]");
  if (!(k_wall > 0) || !(depth > 0) || !(peg_width > 0) || !(peg_length > 0))
    throw DimensionMismatch("stiffness, depth and peg dimensions must be positive");
  if (mu < 0 || damping < 0) throw DimensionMismatch("friction and damping must be nonnegative");
  if ((axis - Eigen::Vector2d(0, -1)).norm() > 1e-9)
    throw DimensionMismatch("this solver supports a vertical hole axis (0,-1)");
  if (!(slip_band > 0) || !(sample_spacing > 0))
    throw DimensionMismatch("slip band and sample spacing must be positive");
}

FtNoiseModel FtNoiseModel::paper_default() {
  FtNoiseModel m;
  m.sigma << 2.0, 2.0, 0.5, 0.5, 0.5, 0.1;
  return m;
}

Wrench contact_wrench(const HoleGeometry& geometry, const EePose& peg_pose,
                      const Twist& peg_twist) {
  if (!peg_pose.position.allFinite() || !peg_twist.allFinite())
    throw DimensionMismatch("pose and twist must be finite");
  std::vector<BoundaryPoint> shape = peg_boundary_points(geometry);
  Wrench w = contact_wrench_world(geometry, shape, peg_pose, peg_twist);
  return world_to_tool(w, peg_pose.planar_angle());
}

EePose seated_pose_for(const HoleGeometry& g) {
  Eigen::Vector2d tip = g.center + g.depth * g.axis;
  Eigen::Vector2d tool = tip - g.peg_length * g.axis;
  double theta = std::atan2(g.axis.y(), g.axis.x());
  return EePose::planar(tool.x(), tool.y(), theta);
}

TaskEnv::TaskEnv(TaskEnvParams params) : params_(std::move(params)) {
  if (params_.model.embedding() != Embedding::kPlanar)
    throw DimensionMismatch("TaskEnv requires a planar model");
  params_.geometry.validate();
  const int n = params_.model.n_joints();
  if (params_.start_q_mean.size() != n || params_.q_desired.size() != n)
    throw DimensionMismatch("start and desired configurations must match n_joints");
  params_.gains.validate(n);
  if (params_.horizon < 2) throw DimensionMismatch("horizon must be at least 2");
  if (!(params_.success_ori_tol > 0)) throw DimensionMismatch("success tolerance must be positive");
  state_ = JointState(params_.start_q_mean, Vec::Zero(n));
  peg_shape_ = peg_boundary_points(params_.geometry);

  // stability cap for the regularized friction at the fixed substep: use the
  // smallest apparent translational mass of the tool at the start posture
  auto ops = opspace_dynamics(params_.model, state_);
  Eigen::Matrix2d lam_t = ops.lambda.block<2, 2>(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(lam_t);
  friction_cap_ = 0.5 * es.eigenvalues().minCoeff() / kSubstep;
}

int TaskEnv::state_dim() const {
  return 2 * params_.model.n_joints() + 6 + (params_.augment_state ? 6 : 0);
}

int TaskEnv::action_dim() const {
  return params_.mode == ActionMode::kOperational ? 6 : params_.model.n_joints();
}

EePose TaskEnv::tool_pose() const { return forward_kinematics(params_.model, state_.q); }

Twist TaskEnv::tool_twist_now() const { return tool_twist(params_.model, state_); }

EePose TaskEnv::seated_tool_pose() const { return seated_pose_for(params_.geometry); }

Vec TaskEnv::pack_state(const JointState& s, const Wrench& measured) const {
  const int n = params_.model.n_joints();
  Vec x(state_dim());
  EePose pose = forward_kinematics(params_.model, s.q);
  Twist v = tool_twist(params_.model, s);
  x.head(n) = s.q;
  x.segment(n, n) = s.qdot;
  x[2 * n + 0] = pose.position.x();
  x[2 * n + 1] = pose.position.y();
  x[2 * n + 2] = pose.planar_angle();
  x[2 * n + 3] = v[0];
  x[2 * n + 4] = v[1];
  x[2 * n + 5] = v[5];
  if (params_.augment_state) x.tail(6) = measured;
  return x;
}

SensorReading TaskEnv::measure() {
  EePose pose = tool_pose();
  Twist v = tool_twist_now();
  SensorReading r;
  r.true_contact = contact_wrench(params_.geometry, pose, v);
  r.measured = r.true_contact + params_.noise.sigma.cwiseProduct(rng_.gaussian_vec(6));
  return r;
}

Vec TaskEnv::reset(std::uint64_t seed) {
  rng_ = RngStream(derive_seed(params_.seed, 0x5EED5EED, seed));
  const int n = params_.model.n_joints();
  Vec q = params_.start_q_mean + params_.start_q_std * rng_.gaussian_vec(n);
  state_ = JointState(q, Vec::Zero(n));
  contact_work_ = 0.0;
  clamp_events_ = 0;
  last_reading_ = measure();
  return pack_state(state_, last_reading_.measured);
}

Vec TaskEnv::reset_mean() {
  rng_ = RngStream(derive_seed(params_.seed, 0x4EA40000, 1));
  const int n = params_.model.n_joints();
  state_ = JointState(params_.start_q_mean, Vec::Zero(n));
  contact_work_ = 0.0;
  clamp_events_ = 0;
  last_reading_ = measure();
  return pack_state(state_, last_reading_.measured);
}

StepResult TaskEnv::step(const Vec& u) {
  if (u.size() != action_dim()) throw DimensionMismatch("action has wrong dimension");
  if (!u.allFinite()) throw DimensionMismatch("action must be finite");

  // commanded actions saturate like a real actuator before execution
  Vec u_sat = u;
  if (params_.mode == ActionMode::kOperational) {
    for (int i = 0; i < 3; ++i) {
      u_sat[i] = std::clamp(u_sat[i], -params_.wrench_force_limit, params_.wrench_force_limit);
      u_sat[3 + i] =
          std::clamp(u_sat[3 + i], -params_.wrench_moment_limit, params_.wrench_moment_limit);
    }
  } else {
    u_sat = u_sat.cwiseMax(-params_.model.torque_limits()).cwiseMin(params_.model.torque_limits());
  }

  const int n_sub = std::max(1, static_cast<int>(std::llround(params_.control_dt / kSubstep)));
  const int n = params_.model.n_joints();
  for (int k = 0; k < n_sub; ++k) {
    EePose pose = forward_kinematics(params_.model, state_.q);
    Twist v = tool_twist(params_.model, state_);
    Wrench w_world = contact_wrench_world(params_.geometry, peg_shape_, pose, v, friction_cap_);

    Vec tau;
    if (params_.mode == ActionMode::kOperational) {
      tau = hybrid_torque(params_.model, state_, u_sat, params_.q_desired, Vec::Zero(n),
                          params_.gains);
    } else {
      tau = u_sat;
    }
    contact_work_ += (w_world[0] * v[0] + w_world[1] * v[1] + w_world[5] * v[5]) * kSubstep;
    state_ = forward_simulate(params_.model, state_, tau, w_world, kSubstep, &clamp_events_);
    if (!state_.q.allFinite() || !state_.qdot.allFinite()) {
      std::fprintf(stderr,
                   "[contact_sim] diverged at substep %d: |u|=%.3e |tau|=%.3e |w|=%.3e "
                   "qd_prev=%.3e\n",
                   k, u.norm(), tau.norm(), w_world.norm(), v.norm());
      throw DimensionMismatch("simulation diverged");
    }
  }
  last_reading_ = measure();
  return {pack_state(state_, last_reading_.measured), last_reading_};
}

double TaskEnv::insertion_depth(const JointState& s) const {
  EePose pose = forward_kinematics(params_.model, s.q);
  Eigen::Rotation2Dd rot(pose.planar_angle());
  Eigen::Vector2d tip =
      Eigen::Vector2d(pose.position.x(), pose.position.y()) +
      rot * Eigen::Vector2d(params_.geometry.peg_length, 0.0);
  return (tip - params_.geometry.center).dot(params_.geometry.axis);
}

// Success is judged on the assembled feature: the peg tip must sit at the
// hole bottom, centered within the position tolerance, with the peg upright.
bool TaskEnv::is_success(const JointState& s) const {
  const HoleGeometry& g = params_.geometry;
  EePose pose = forward_kinematics(params_.model, s.q);
  EePose target = seated_pose_for(g);
  Eigen::Rotation2Dd rot(pose.planar_angle());
  Eigen::Vector2d tip = Eigen::Vector2d(pose.position.x(), pose.position.y()) +
                        rot * Eigen::Vector2d(g.peg_length, 0.0);
  Eigen::Vector2d tip_target = g.center + g.depth * g.axis;
  Eigen::Vector2d lateral(-g.axis.y(), g.axis.x());
  double lateral_err = std::abs((tip - tip_target).dot(lateral));
  double ori_err = std::abs(wrap_angle(pose.planar_angle() - target.planar_angle()));
  double pos_tol = params_.success_pos_tol > 0 ? params_.success_pos_tol : g.gap();
  return lateral_err <= pos_tol && ori_err <= params_.success_ori_tol &&
         insertion_depth(s) >= 0.95 * g.depth;
}

TaskEnv TaskEnv::shift_goal(const Eigen::Vector2d& offset) const {
  TaskEnvParams p = params_;
  p.geometry.center += offset;
  EePose seated = seated_pose_for(p.geometry);
  if (seated.position.head<2>().norm() > 0.98 * params_.model.reach())
    throw Unreachable("shifted goal leaves the workspace");
  return TaskEnv(p);
}

}  // namespace forcerl
