#pragma once

#include "forcerl/system.hpp"
#include "forcerl/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace forcerl {

/// One rollout: T states, T actions, per-step cost and sensor reading.
/// readings[t] is the measurement taken at states[t] before acting.
struct Trajectory {
  Mat states;   // T x xdim
  Mat actions;  // T x udim
  Vec costs;    // T
  std::vector<SensorReading> readings;
  bool success = false;

  int horizon() const { return static_cast<int>(states.rows()); }
  double total_cost() const { return costs.sum(); }
};

/// Time-varying linear-Gaussian transition model x' = A x + B u + f, noise Sigma.
struct LinearGaussianDynamics {
  std::vector<Mat> A;
  std::vector<Mat> B;
  std::vector<Vec> f;
  std::vector<Mat> sigma;
  int horizon() const { return static_cast<int>(A.size()); }  // = T - 1
};

/// Time-varying affine-Gaussian control law u ~ N(K x + k, C). Depending on
/// context k is either absolute or an offset relative to a nominal trajectory.
struct LinearGaussianPolicy {
  std::vector<Mat> K;
  std::vector<Vec> k;
  std::vector<Mat> C;
  int horizon() const { return static_cast<int>(K.size()); }
  int xdim() const { return K.empty() ? 0 : static_cast<int>(K[0].cols()); }
  int udim() const { return K.empty() ? 0 : static_cast<int>(K[0].rows()); }

  static LinearGaussianPolicy hold(int T, int xdim, int udim, const Vec& cov_diag,
                                   const Vec& nominal_action = Vec());
};

struct CostExpansion {
  double l = 0;
  Vec lx, lu;
  Mat lxx, luu, lux;
};

/// Twice-differentiable stage cost.
class CostFunction {
 public:
  virtual ~CostFunction() = default;
  virtual double value(const Vec& x, const Vec& u) const = 0;
  virtual CostExpansion quadratic(const Vec& x, const Vec& u) const = 0;
};

/// Goal-plane task cost: three body points on the end-effector pulled toward
/// three target points, l1/l2 mixture with a smoothed l1 and a quadratic
/// action penalty. Differentiates through the planar pose entries of the
/// fitting state.
struct CostSpec {
  Eigen::Matrix<double, 3, 2> body_points;    // tool frame
  Eigen::Matrix<double, 3, 2> target_points;  // world
  double w_l1 = 1.0;
  double w_l2 = 10.0;
  double alpha_s = 1e-3;  // m, l1 smoothing
  double w_u = 1e-3;
  void validate() const;
};

class PlaneCost : public CostFunction {
 public:
  PlaneCost(CostSpec spec, int n_joints, int xdim, int udim);
  double value(const Vec& x, const Vec& u) const override;
  CostExpansion quadratic(const Vec& x, const Vec& u) const override;
  const CostSpec& spec() const { return spec_; }

 private:
  CostSpec spec_;
  int n_;
  int xdim_;
  int udim_;
};

/// Pooled-window ridge regression of per-step transitions.
LinearGaussianDynamics fit_dynamics(const std::vector<Trajectory>& trajectories, double epsilon);

struct BackwardPassResult {
  LinearGaussianPolicy policy;  // k relative to the nominal actions
  std::vector<Mat> quu;         // regularized curvature the law inverted
  std::vector<Mat> vxx;         // value Hessians per step
  double dv1 = 0;               // expected reduction, linear coefficient
  double dv2 = 0;               // quadratic coefficient
};

/// Entropy-augmented LQR backward pass over fitted dynamics. Throws
/// NotPositiveDefinite (with the offending step) when Q_uu + mu I fails its
/// Cholesky; callers raise mu and retry. C_t is the inverse of the curvature
/// actually used, scaled by the entropy weight (weight 0 keeps the plain
/// inverse and is meant for noiseless use).
BackwardPassResult backward_pass(const LinearGaussianDynamics& dyn,
                                 const std::vector<CostExpansion>& expansions, double mu,
                                 double entropy_weight);

/// Same recursion expanded around a nominal trajectory: the fitted model's
/// drift relative to the nominal enters the linear value terms.
BackwardPassResult backward_pass_around(const LinearGaussianDynamics& dyn,
                                        const std::vector<CostExpansion>& expansions, double mu,
                                        double entropy_weight, const Trajectory* nominal);

/// Rollout of u = u_nom + alpha k + K (x - x_nom) (+ policy noise) through the
/// system. Passing nominal = nullptr executes the policy as an absolute law.
Trajectory forward_pass(RolloutSystem& sys, const CostFunction& cost,
                        const LinearGaussianPolicy& policy, const Trajectory* nominal,
                        double alpha, bool noise, std::uint64_t seed, bool perturbed_start = true);

struct IlqgConfig {
  int iterations = 8;
  int rollouts_per_iteration = 4;
  double entropy_weight = 1.0;
  double fit_regularizer = 1e-6;
  double mu_init = 1e-6;
  double mu_max = 1e6;
  double mu_decay = 0.2;  // multiplier applied when a step is accepted
  double mu_floor = 1e-8;  // mu never decays below this
  std::vector<double> alphas = {1.0, 0.5, 0.25, 0.1, 0.05};
  double init_force_std = 5.0;    // N, exploration on wrench force rows
  double init_torque_std = 0.5;   // N m, exploration on torque rows
  std::uint64_t seed = 0;
  Vec base_action;                // nominal action of the initial hold policy
  void validate() const;
};

struct IterationRecord {
  int iteration;
  double nominal_cost;
  double mean_rollout_cost;
  int success_count;
  double accepted_alpha;  // 0 when the line search rejected
  double mean_action_norm;
  double mu;
  double max_gain = 0;        // largest row norm of K over t
  double mean_policy_std = 0; // mean sqrt diag C over t
};

struct TrainLog {
  std::vector<IterationRecord> rows;
  bool aborted = false;
  std::string note;
};

struct OptimizeResult {
  LinearGaussianPolicy policy;  // absolute law, ready for execution
  Trajectory nominal;
  TrainLog log;
};

/// Iterative loop: sample N noisy rollouts, refit dynamics, backward pass with
/// mu adaptation, rollout-cost line search over alpha.
OptimizeResult optimize(RolloutSystem& sys, const IlqgConfig& config, const CostFunction& cost);

}  // namespace forcerl
