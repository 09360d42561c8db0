#pragma once

#include "forcerl/manip_model.hpp"
#include "forcerl/opspace_ctrl.hpp"
#include "forcerl/rng.hpp"
#include "forcerl/system.hpp"
#include "forcerl/types.hpp"

#include <memory>
#include <optional>

namespace forcerl {

/// Slot-in-a-floor insertion geometry for the planar arm. The hole mouth is
/// centered at `center` in the floor surface, the cavity extends `depth`
/// along `axis` (vertical, pointing into the floor). The peg is a rectangle
/// rigidly attached to the tool, extending peg_length along the tool x axis
/// and peg_width across it. Clearance is the width play as a fraction of the
/// peg width: hole width = peg_width * (1 + clearance).
struct HoleGeometry {
  Eigen::Vector2d center{0.30, -0.35};
  Eigen::Vector2d axis{0.0, -1.0};
  double depth = 0.03;
  double peg_width = 0.05;
  double peg_length = 0.08;
  double clearance = 0.005;
  double k_wall = 5e4;       // N/m
  double damping = 50.0;     // N s/m
  double mu = 0.3;           // Coulomb friction
  double slip_band = 1e-3;   // m/s, friction regularization
  double sample_spacing = 0.005;

  double gap() const { return clearance * peg_width; }
  double hole_width() const { return peg_width * (1.0 + clearance); }
  void validate() const;
};

struct FtNoiseModel {
  Vec6 sigma = Vec6::Zero();
  static FtNoiseModel paper_default();  // (2.0, 2.0, 0.5 N; 0.5, 0.5, 0.1 N m)
  static FtNoiseModel zero() { return FtNoiseModel{}; }
};

enum class ActionMode { kOperational, kTorque };

struct BoundaryPoint {
  Eigen::Vector2d p;  // tool frame
  double w;           // share of its face's stiffness
};

/// Contact wrench of the peg against the slot geometry, expressed in the tool
/// frame. Penalty normal forces with dissipative damping and slip-band
/// regularized Coulomb friction. Zero when nothing penetrates.
Wrench contact_wrench(const HoleGeometry& geometry, const EePose& peg_pose,
                      const Twist& peg_twist);

struct TaskEnvParams {
  ManipulatorModel model = ManipulatorModel::planar({{0.3, 1.2, 0.15, 0.009}});
  HoleGeometry geometry;
  FtNoiseModel noise;
  HybridGains gains = HybridGains::defaults(1);
  Vec start_q_mean;            // mean reset configuration
  double start_q_std = 0.01;   // rad, per-joint reset perturbation
  Vec q_desired;               // hold target of the position loop (IK of the goal)
  int horizon = 100;           // control steps
  double control_dt = 0.05;    // 20 Hz
  double success_pos_tol = -1;    // m, at the peg tip; <=0 resolves to the clearance gap
  double success_ori_tol = 0.05;  // rad
  double wrench_force_limit = 80.0;   // N, saturation of commanded forces
  double wrench_moment_limit = 20.0;  // N m
  ActionMode mode = ActionMode::kOperational;
  bool augment_state = false;  // append measured F/T to the fitting state
  std::uint64_t seed = 0;
};

/// Contact world with a noisy tool-frame F/T sensor. Owns its RNG; one rollout
/// at a time per instance, clones with distinct seeds may run concurrently.
///
/// Fitting state layout (planar): [q, qdot, tool x, tool y, tool angle,
/// vx, vy, omega] followed by the measured wrench when augmented.
class TaskEnv : public RolloutSystem {
 public:
  explicit TaskEnv(TaskEnvParams params);

  int state_dim() const override;
  int action_dim() const override;
  int horizon() const override { return params_.horizon; }

  Vec reset(std::uint64_t seed) override;
  Vec reset_mean() override;
  StepResult step(const Vec& u) override;
  SensorReading last_reading() const override { return last_reading_; }
  bool succeeded() const override { return is_success(state_); }

  bool is_success(const JointState& s) const;

  /// New environment with the hole translated by `offset`; controller and
  /// policies keep their original targets. Throws Unreachable when the
  /// shifted seated pose leaves the workspace.
  TaskEnv shift_goal(const Eigen::Vector2d& offset) const;

  const TaskEnvParams& params() const { return params_; }
  const JointState& joint_state() const { return state_; }
  EePose tool_pose() const;
  Twist tool_twist_now() const;
  EePose seated_tool_pose() const;
  Vec pack_state(const JointState& s, const Wrench& measured) const;

  double contact_work() const { return contact_work_; }
  int clamp_events() const { return clamp_events_; }
  double insertion_depth(const JointState& s) const;

 private:
  SensorReading measure();

  TaskEnvParams params_;
  JointState state_;
  SensorReading last_reading_;
  RngStream rng_{0};
  std::vector<BoundaryPoint> peg_shape_;
  double friction_cap_ = 0.0;
  double contact_work_ = 0.0;
  int clamp_events_ = 0;
};

/// Seated tool pose for a given geometry (peg tip at the hole bottom, peg
/// axis aligned with the hole axis).
EePose seated_pose_for(const HoleGeometry& g);

}  // namespace forcerl
