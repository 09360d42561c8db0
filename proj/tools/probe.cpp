// Scratch experiment driver used while tuning the task defaults.
#include "forcerl/contact_sim.hpp"
#include "forcerl/ilqg.hpp"
#include "forcerl/opspace_ctrl.hpp"

#include <cstdio>
#include <string>

using namespace forcerl;

namespace {

ManipulatorModel standard_arm() {
  std::vector<LinkParams> links;
  for (double l : {0.30, 0.25, 0.20}) {
    double m = 4.0 * l;
    links.push_back({l, m, l / 2, m * l * l / 12.0});
  }
  return ManipulatorModel::planar(links);
}

Vec ik_or_throw(const ManipulatorModel& model, const EePose& target) {
  for (double a : {-0.3, 0.2, -0.8}) {
    Vec s(model.n_joints());
    for (int i = 0; i < s.size(); ++i) s[i] = a - 0.4 * i;
    auto res = inverse_kinematics(model, target, s);
    if (res.converged) return res.q;
  }
  throw Unreachable("probe target not reachable");
}

CostSpec peg_cost_spec(const HoleGeometry& g) {
  CostSpec spec;
  EePose seat = seated_pose_for(g);
  Eigen::Rotation2Dd rot(seat.planar_angle());
  spec.body_points << 0, 0, g.peg_length, -0.5 * g.peg_width, g.peg_length, 0.5 * g.peg_width;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector2d world =
        Eigen::Vector2d(seat.position.x(), seat.position.y()) +
        rot * Eigen::Vector2d(spec.body_points.row(i));
    spec.target_points.row(i) = world.transpose();
  }
  return spec;
}

TaskEnvParams standard_task(std::uint64_t seed, double peg_width, double start_height) {
  TaskEnvParams p;
  p.model = standard_arm();
  p.geometry = HoleGeometry{};
  p.geometry.peg_width = peg_width;
  p.noise = FtNoiseModel::paper_default();
  p.gains = HybridGains::defaults(3);
  EePose seated = seated_pose_for(p.geometry);
  EePose start = EePose::planar(seated.position.x(), seated.position.y() + start_height,
                                seated.planar_angle());
  p.q_desired = ik_or_throw(p.model, seated);
  p.start_q_mean = ik_or_throw(p.model, start);
  p.horizon = 100;
  p.seed = seed;
  return p;
}

}  // namespace

double argd(int argc, char** argv, int i, double def) {
  return argc > i ? std::stod(argv[i]) : def;
}

int main(int argc, char** argv) {
  std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 17;
  ActionMode mode = (argc > 2 && std::string(argv[2]) == "torque") ? ActionMode::kTorque
                                                                   : ActionMode::kOperational;
  double w1 = argd(argc, argv, 3, 1.0);
  double w2 = argd(argc, argv, 4, 10.0);
  double wu = argd(argc, argv, 5, 1e-3);
  double kqp = argd(argc, argv, 6, 2.0);
  double kqd = argd(argc, argv, 7, 0.5);
  double s1 = argd(argc, argv, 8, 0.3);
  int iters = static_cast<int>(argd(argc, argv, 9, 8));
  double alpha_s = argd(argc, argv, 10, 1e-3);
  double mu_init = argd(argc, argv, 11, 1e-6);
  double mu_decay = argd(argc, argv, 12, 0.2);
  double mu_floor = argd(argc, argv, 13, 1e-8);
  double peg_width = argd(argc, argv, 16, 0.05);
  double start_height = argd(argc, argv, 17, 0.10);

  TaskEnvParams p = standard_task(seed, peg_width, start_height);
  p.mode = mode;
  p.gains = HybridGains::defaults(3, kqp, kqd, s1, 1.0);
  p.wrench_force_limit = argd(argc, argv, 14, 80.0);
  p.wrench_moment_limit = argd(argc, argv, 15, 20.0);
  TaskEnv env(p);
  CostSpec cs = peg_cost_spec(p.geometry);
  cs.w_l1 = w1;
  cs.w_l2 = w2;
  cs.w_u = wu;
  cs.alpha_s = alpha_s;
  PlaneCost cost(cs, 3, env.state_dim(), env.action_dim());

  IlqgConfig cfg;
  cfg.iterations = iters;
  cfg.rollouts_per_iteration = 4;
  cfg.mu_init = mu_init;
  cfg.mu_decay = mu_decay;
  cfg.mu_floor = mu_floor;
  cfg.seed = seed;
  if (mode == ActionMode::kTorque) {
    Vec hold = dynamics_terms(p.model, JointState(p.start_q_mean, Vec::Zero(3))).g_vec;
    cfg.base_action = hold;
  }

  auto res = optimize(env, cfg, cost);
  for (const auto& r : res.log.rows)
    std::printf(
        "iter %d nominal %9.4f mean %11.4f succ %d/%d alpha %.2f |u| %7.2f mu %.2e K %.2e std "
        "%.2f\n",
        r.iteration, r.nominal_cost, r.mean_rollout_cost, r.success_count,
        cfg.rollouts_per_iteration, r.accepted_alpha, r.mean_action_norm, r.mu, r.max_gain,
        r.mean_policy_std);
  if (res.log.aborted) std::printf("ABORTED: %s\n", res.log.note.c_str());

  // evaluation: mean policy, perturbed starts, fresh seeds
  int succ = 0;
  const int episodes = 5;
  for (int ep = 0; ep < episodes; ++ep) {
    Trajectory tr = forward_pass(env, cost, res.policy, nullptr, 1.0, false,
                                 derive_seed(seed, 0xEEAA, ep), true);
    EePose pose = env.tool_pose();
    EePose seat = env.seated_tool_pose();
    Eigen::Rotation2Dd rot(pose.planar_angle());
    const auto& g = env.params().geometry;
    Eigen::Vector2d tip = Eigen::Vector2d(pose.position.x(), pose.position.y()) +
                          rot * Eigen::Vector2d(g.peg_length, 0.0);
    Eigen::Vector2d tip_target = g.center + g.depth * g.axis;
    std::printf("eval %d success %d cost %9.4f depth %.4f tiplat %.2e ori %.2e\n", ep,
                tr.success ? 1 : 0, tr.total_cost(), env.insertion_depth(env.joint_state()),
                std::abs(tip.x() - tip_target.x()),
                std::abs(wrap_angle(pose.planar_angle() - seat.planar_angle())));
    succ += tr.success ? 1 : 0;
  }
  std::printf("EVAL %d/%d\n", succ, episodes);
  return 0;
}
