#include "forcerl/ilqg.hpp"

#include "forcerl/rng.hpp"

#include <algorithm>
#include <cmath>

namespace forcerl {

LinearGaussianPolicy LinearGaussianPolicy::hold(int T, int xdim, int udim, const Vec& cov_diag,
                                                const Vec& nominal_action) {
  LinearGaussianPolicy p;
  Vec k0 = nominal_action.size() ? nominal_action : Vec::Zero(udim);
  if (k0.size() != udim || cov_diag.size() != udim)
    throw DimensionMismatch("hold policy: action dimension mismatch");
  p.K.assign(T, Mat::Zero(udim, xdim));
  p.k.assign(T, k0);
  p.C.assign(T, Mat(cov_diag.asDiagonal()));
  return p;
}

void CostSpec::validate() const {
  if (w_l1 < 0 || w_l2 < 0 || w_u < 0) throw DimensionMismatch("cost weights must be nonnegative");
  if (!(alpha_s > 0)) throw DimensionMismatch("l1 smoothing must be positive");
  Eigen::Vector2d e1 = target_points.row(1) - target_points.row(0);
  Eigen::Vector2d e2 = target_points.row(2) - target_points.row(0);
  if (std::abs(e1.x() * e2.y() - e1.y() * e2.x()) < 1e-12)
    throw DimensionMismatch("target points must not be collinear");
}

PlaneCost::PlaneCost(CostSpec spec, int n_joints, int xdim, int udim)
    : spec_(std::move(spec)), n_(n_joints), xdim_(xdim), udim_(udim) {
  spec_.validate();
  if (xdim_ < 2 * n_ + 6) throw DimensionMismatch("state too short for the pose block");
}

double PlaneCost::value(const Vec& x, const Vec& u) const {
  const double theta = x[2 * n_ + 2];
  const Eigen::Rotation2Dd rot(theta);
  const Eigen::Vector2d pos(x[2 * n_], x[2 * n_ + 1]);
  double l = spec_.w_u * u.squaredNorm();
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector2d d =
        pos + rot * Eigen::Vector2d(spec_.body_points.row(i)) -
        Eigen::Vector2d(spec_.target_points.row(i));
    for (int c = 0; c < 2; ++c) {
      l += spec_.w_l1 * std::sqrt(d[c] * d[c] + spec_.alpha_s * spec_.alpha_s);
      l += spec_.w_l2 * d[c] * d[c];
    }
  }
  return l;
}

CostExpansion PlaneCost::quadratic(const Vec& x, const Vec& u) const {
  if (x.size() != xdim_ || u.size() != udim_) throw DimensionMismatch("cost: bad dimensions");
  CostExpansion e;
  e.lx = Vec::Zero(xdim_);
  e.lxx = Mat::Zero(xdim_, xdim_);
  e.lu = 2.0 * spec_.w_u * u;
  e.luu = 2.0 * spec_.w_u * Mat::Identity(udim_, udim_);
  e.lux = Mat::Zero(udim_, xdim_);
  e.l = spec_.w_u * u.squaredNorm();

  const int px = 2 * n_;  // pose block: x, y, theta
  const double theta = x[px + 2];
  const Eigen::Rotation2Dd rot(theta);
  Eigen::Matrix2d dR;
  dR << -std::sin(theta), -std::cos(theta), std::cos(theta), -std::sin(theta);
  const Eigen::Vector2d pos(x[px], x[px + 1]);

  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  const double a2 = spec_.alpha_s * spec_.alpha_s;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector2d b = spec_.body_points.row(i);
    Eigen::Vector2d d = pos + rot * b - Eigen::Vector2d(spec_.target_points.row(i));
    Eigen::Matrix<double, 2, 3> Jp;
    Jp << 1, 0, (dR * b).x(), 0, 1, (dR * b).y();
    Eigen::Vector2d ddtt = -(rot * b);  // second derivative of the pair wrt theta
    for (int c = 0; c < 2; ++c) {
      double r = std::sqrt(d[c] * d[c] + a2);
      double phi1 = spec_.w_l1 * d[c] / r + 2.0 * spec_.w_l2 * d[c];
      double phi2 = spec_.w_l1 * a2 / (r * r * r) + 2.0 * spec_.w_l2;
      e.l += spec_.w_l1 * r + spec_.w_l2 * d[c] * d[c];
      Eigen::Vector3d jc = Jp.row(c);
      g += phi1 * jc;
      H += phi2 * jc * jc.transpose();
      H(2, 2) += phi1 * ddtt[c];
    }
  }
  e.lx.segment<3>(px) = g;
  e.lxx.block<3, 3>(px, px) = H;
  return e;
}

LinearGaussianDynamics fit_dynamics(const std::vector<Trajectory>& trajectories, double epsilon) {
  if (trajectories.size() < 2) throw InsufficientData("need at least two trajectories");
  if (!(epsilon > 0)) throw DimensionMismatch("regularizer must be positive");
  const int T = trajectories[0].horizon();
  const int xdim = static_cast<int>(trajectories[0].states.cols());
  const int udim = static_cast<int>(trajectories[0].actions.cols());
  for (const auto& tr : trajectories)
    if (tr.horizon() != T || tr.states.cols() != xdim || tr.actions.cols() != udim)
      throw DimensionMismatch("trajectories must share horizon and dimensions");

  const int p = xdim + udim + 1;
  LinearGaussianDynamics dyn;
  dyn.A.resize(T - 1);
  dyn.B.resize(T - 1);
  dyn.f.resize(T - 1);
  dyn.sigma.resize(T - 1);

  for (int t = 0; t < T - 1; ++t) {
    int window = 2;
    int count = 0;
    auto pooled_count = [&](int w) {
      int lo = std::max(0, t - w), hi = std::min(T - 2, t + w);
      return static_cast<int>(trajectories.size()) * (hi - lo + 1);
    };
    while (pooled_count(window) < p && window < 5) ++window;
    count = pooled_count(window);
    if (count < p) throw InsufficientData("not enough pooled transitions at step " +
                                          std::to_string(t));

    // centered features against delta targets: the ridge shrinks toward the
    // x' = x prior instead of toward zero dynamics; the intercept is exact
    const int pf = xdim + udim;
    Mat phi(count, pf);
    Mat y(count, xdim);
    int row = 0;
    const int lo = std::max(0, t - window), hi = std::min(T - 2, t + window);
    for (const auto& tr : trajectories) {
      for (int s = lo; s <= hi; ++s) {
        phi.block(row, 0, 1, xdim) = tr.states.row(s);
        phi.block(row, xdim, 1, udim) = tr.actions.row(s);
        y.row(row) = tr.states.row(s + 1) - tr.states.row(s);
        ++row;
      }
    }
    Vec phi_mean = phi.colwise().mean();
    Vec y_mean = y.colwise().mean();
    Mat phi_c = phi.rowwise() - phi_mean.transpose();
    Mat y_c = y.rowwise() - y_mean.transpose();
    Mat gram = phi_c.transpose() * phi_c + epsilon * Mat::Identity(pf, pf);
    Mat beta = gram.ldlt().solve(phi_c.transpose() * y_c);  // pf x xdim
    dyn.A[t] = beta.topRows(xdim).transpose() + Mat::Identity(xdim, xdim);
    dyn.B[t] = beta.middleRows(xdim, udim).transpose();
    dyn.f[t] = y_mean - beta.transpose() * phi_mean;
    Mat resid = y_c - phi_c * beta;
    dyn.sigma[t] =
        resid.transpose() * resid / std::max(1, count - 1) + epsilon * Mat::Identity(xdim, xdim);
  }
  return dyn;
}

BackwardPassResult backward_pass(const LinearGaussianDynamics& dyn,
                                 const std::vector<CostExpansion>& expansions, double mu,
                                 double entropy_weight) {
  return backward_pass_around(dyn, expansions, mu, entropy_weight, nullptr);
}

BackwardPassResult backward_pass_around(const LinearGaussianDynamics& dyn,
                                        const std::vector<CostExpansion>& expansions, double mu,
                                        double entropy_weight, const Trajectory* nominal) {
  const int T = static_cast<int>(expansions.size());
  if (T < 1) throw DimensionMismatch("empty cost expansion");
  if (dyn.horizon() != T - 1) throw DimensionMismatch("dynamics horizon must be T-1");
  const int xdim = static_cast<int>(expansions[0].lx.size());
  const int udim = static_cast<int>(expansions[0].lu.size());
  const double cov_scale = entropy_weight > 0 ? entropy_weight : 1.0;

  BackwardPassResult out;
  out.policy.K.resize(T);
  out.policy.k.resize(T);
  out.policy.C.resize(T);
  out.quu.resize(T);
  out.vxx.resize(T);

  Vec vx = Vec::Zero(xdim);
  Mat vxx = Mat::Zero(xdim, xdim);
  for (int t = T - 1; t >= 0; --t) {
    const CostExpansion& e = expansions[t];
    Vec qx = e.lx, qu = e.lu;
    Mat qxx = e.lxx, quu = e.luu, qux = e.lux;
    if (t < T - 1) {
      const Mat& A = dyn.A[t];
      const Mat& B = dyn.B[t];
      Vec vx_eff = vx;
      if (nominal) {
        Vec defect = A * nominal->states.row(t).transpose() +
                     B * nominal->actions.row(t).transpose() + dyn.f[t] -
                     nominal->states.row(t + 1).transpose();
        vx_eff += vxx * defect;
      }
      qx.noalias() += A.transpose() * vx_eff;
      qu.noalias() += B.transpose() * vx_eff;
      qxx.noalias() += A.transpose() * vxx * A;
      quu.noalias() += B.transpose() * vxx * B;
      qux.noalias() += B.transpose() * vxx * A;
    }
    Mat quu_reg = quu + mu * Mat::Identity(udim, udim);
    quu_reg = 0.5 * (quu_reg + quu_reg.transpose());
    Eigen::LLT<Mat> chol(quu_reg);
    if (chol.info() != Eigen::Success) throw NotPositiveDefinite(t);

    Mat K = -chol.solve(qux);
    Vec k = -chol.solve(qu);
    Mat cinv = chol.solve(Mat::Identity(udim, udim));

    out.policy.K[t] = K;
    out.policy.k[t] = k;
    out.policy.C[t] = cov_scale * 0.5 * (cinv + cinv.transpose());
    out.quu[t] = quu_reg;
    out.dv1 += k.dot(qu);
    out.dv2 += 0.5 * k.dot(quu_reg * k);

    vx = qx + K.transpose() * (quu_reg * k) + K.transpose() * qu + qux.transpose() * k;
    vxx = qxx + K.transpose() * quu_reg * K + K.transpose() * qux + qux.transpose() * K;
    vxx = 0.5 * (vxx + vxx.transpose());
    out.vxx[t] = vxx;
  }
  return out;
}

Trajectory forward_pass(RolloutSystem& sys, const CostFunction& cost,
                        const LinearGaussianPolicy& policy, const Trajectory* nominal,
                        double alpha, bool noise, std::uint64_t seed, bool perturbed_start) {
  const int T = sys.horizon();
  const int xdim = sys.state_dim();
  const int udim = sys.action_dim();
  if (policy.horizon() != T) throw DimensionMismatch("policy horizon must match the system");
  if (nominal && nominal->horizon() != T)
    throw DimensionMismatch("nominal horizon must match the system");

  Trajectory traj;
  traj.states.resize(T, xdim);
  traj.actions.resize(T, udim);
  traj.costs.resize(T);
  traj.readings.resize(T);

  RngStream act_rng(derive_seed(seed, 0xAC7101u));
  Vec x = perturbed_start ? sys.reset(seed) : sys.reset_mean();
  traj.readings[0] = sys.last_reading();
  for (int t = 0; t < T; ++t) {
    traj.states.row(t) = x.transpose();
    Vec u;
    if (nominal) {
      u = nominal->actions.row(t).transpose() + alpha * policy.k[t] +
          policy.K[t] * (x - nominal->states.row(t).transpose());
    } else {
      u = policy.K[t] * x + policy.k[t];
    }
    if (noise) {
      Eigen::LLT<Mat> chol(policy.C[t]);
      if (chol.info() != Eigen::Success)
        throw NotPositiveDefinite(t);
      u += chol.matrixL() * act_rng.gaussian_vec(udim);
    }
    traj.actions.row(t) = u.transpose();
    traj.costs[t] = cost.value(x, u);
    if (t < T - 1) {
      StepResult sr = sys.step(u);
      x = sr.x;
      traj.readings[t + 1] = sr.reading;
    }
  }
  traj.success = sys.succeeded();
  return traj;
}

void IlqgConfig::validate() const {
  if (rollouts_per_iteration < 2) throw DimensionMismatch("need at least two rollouts");
  if (iterations < 1) throw DimensionMismatch("need at least one iteration");
  if (!(fit_regularizer > 0)) throw DimensionMismatch("fit regularizer must be positive");
  if (entropy_weight < 0) throw DimensionMismatch("entropy weight must be nonnegative");
  if (alphas.empty()) throw DimensionMismatch("line search needs candidate steps");
}

namespace {

Vec initial_cov_diag(const IlqgConfig& cfg, int udim) {
  Vec d(udim);
  if (udim == 6) {
    d.head(3).setConstant(cfg.init_force_std * cfg.init_force_std);
    d.tail(3).setConstant(cfg.init_torque_std * cfg.init_torque_std);
  } else {
    d.setConstant(cfg.init_torque_std * cfg.init_torque_std);
  }
  return d;
}

}  // namespace

OptimizeResult optimize(RolloutSystem& sys, const IlqgConfig& config, const CostFunction& cost) {
  config.validate();
  const int T = sys.horizon();
  const int xdim = sys.state_dim();
  const int udim = sys.action_dim();

  Vec base = config.base_action.size() ? config.base_action : Vec::Zero(udim);
  if (base.size() != udim) throw DimensionMismatch("base action dimension mismatch");
  const Vec c0 = initial_cov_diag(config, udim);

  // hold policy: nominal actions with exploration noise, no feedback yet
  LinearGaussianPolicy hold = LinearGaussianPolicy::hold(T, xdim, udim, c0, base);
  Trajectory nominal = forward_pass(sys, cost, hold, nullptr, 1.0, false,
                                    derive_seed(config.seed, 0x0B0E), false);

  LinearGaussianPolicy sampler = LinearGaussianPolicy::hold(T, xdim, udim, c0);
  std::vector<Mat> exec_K = sampler.K;
  std::vector<Mat> exec_C = sampler.C;

  OptimizeResult out;
  double mu = config.mu_init;

  for (int iter = 1; iter <= config.iterations; ++iter) {
    std::vector<Trajectory> rollouts;
    rollouts.reserve(config.rollouts_per_iteration + 1);
    double mean_cost = 0;
    double mean_u = 0;
    int successes = 0;
    for (int i = 0; i < config.rollouts_per_iteration; ++i) {
      rollouts.push_back(forward_pass(sys, cost, sampler, &nominal, 0.0, true,
                                      derive_seed(config.seed, iter, i), true));
      mean_cost += rollouts.back().total_cost();
      mean_u += rollouts.back().actions.rowwise().norm().mean();
      successes += rollouts.back().success ? 1 : 0;
    }
    mean_cost /= config.rollouts_per_iteration;
    mean_u /= config.rollouts_per_iteration;

    // the nominal anchors the regression in the neighborhood the backward
    // pass expands around
    rollouts.push_back(nominal);
    LinearGaussianDynamics dyn = fit_dynamics(rollouts, config.fit_regularizer);
    rollouts.pop_back();
    std::vector<CostExpansion> exps(T);
    for (int t = 0; t < T; ++t)
      exps[t] = cost.quadratic(nominal.states.row(t).transpose(),
                               nominal.actions.row(t).transpose());

    BackwardPassResult bp;
    bool bp_ok = false;
    while (!bp_ok) {
      try {
        bp = backward_pass_around(dyn, exps, mu, config.entropy_weight, &nominal);
        bp_ok = true;
      } catch (const NotPositiveDefinite&) {
        mu = std::max(mu, 1e-6) * 10.0;
        if (mu > config.mu_max) {
          out.log.aborted = true;
          out.log.note = "mu exceeded mu_max during backward pass";
          break;
        }
      }
    }
    if (!bp_ok) break;

    double max_gain = 0, mean_std = 0;
    for (int t = 0; t < T; ++t) {
      max_gain = std::max(max_gain, bp.policy.K[t].rowwise().norm().maxCoeff());
      mean_std += bp.policy.C[t].diagonal().cwiseSqrt().mean() / T;
    }

    double accepted = 0.0;
    for (double alpha : config.alphas) {
      Trajectory cand = forward_pass(sys, cost, bp.policy, &nominal, alpha, false,
                                     derive_seed(config.seed, iter, 0xCA11D), false);
      if (cand.total_cost() < nominal.total_cost()) {
        nominal = cand;
        accepted = alpha;
        break;
      }
    }
    if (accepted > 0) {
      // data collection stays open loop around the nominal: exploration uses
      // the policy covariance (plus a small floor keeping the regression
      // excited) without amplifying model error through the gains
      for (int t = 0; t < T; ++t)
        sampler.C[t] = bp.policy.C[t] + 0.04 * Mat(c0.asDiagonal());
      exec_K = bp.policy.K;
      exec_C = bp.policy.C;
      mu = std::max(config.mu_floor, mu * config.mu_decay);
    } else {
      mu = std::max(mu, 1e-6) * 10.0;
      if (mu > config.mu_max) {
        out.log.aborted = true;
        out.log.note = "mu exceeded mu_max after rejected line search";
        out.log.rows.push_back({iter, nominal.total_cost(), mean_cost, successes, accepted,
                                mean_u, mu, max_gain, mean_std});
        break;
      }
    }
    out.log.rows.push_back({iter, nominal.total_cost(), mean_cost, successes, accepted, mean_u,
                            mu, max_gain, mean_std});
  }

  // absolute execution law reproducing the nominal with feedback around it
  out.policy.K = exec_K;
  out.policy.C = exec_C;
  out.policy.k.resize(T);
  for (int t = 0; t < T; ++t)
    out.policy.k[t] =
        nominal.actions.row(t).transpose() - exec_K[t] * nominal.states.row(t).transpose();
  out.nominal = std::move(nominal);
  return out;
}

}  // namespace forcerl
