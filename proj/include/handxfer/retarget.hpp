#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "handxfer/kinematics.hpp"
#include "handxfer/trajectory.hpp"

namespace handxfer {

// Human keypoint row paired with a robot keypoint.
struct Correspondence {
  int human_row = 0;
  std::string robot_keypoint;
  double weight = 1.0;
};

struct SolverOptions {
  int max_iters = 50;
  double residual_tol = 1e-10;
  double damping_init = 1e-3;
  // Iteration budget for the first frame, which starts from the rest pose
  // and has no step bound.
  int initial_iters = 500;
};

struct RetargetConfig {
  double alpha = 1.6;
  std::vector<Correspondence> correspondence;
  double step_limit = 0.15;  // bound on ||q_t - q_{t-1}||, radians / meters
  SolverOptions solver;
  // Baseline retargeters only.
  double pair_weight = 1.0;      // fingertip-pair terms (DexPilot)
  double rotation_weight = 0.1;  // meters per radian in the wrist IK
};

// Correspondence over every hand-layout keypoint the chain defines: weight 1
// for fingertips, 0.5 for the rest.
std::vector<Correspondence> default_correspondence(const KinematicChain& chain);
RetargetConfig default_retarget_config(const KinematicChain& chain);

// Throws ConfigError naming the offending field.
void validate(const RetargetConfig& cfg, const KinematicChain& chain);

nlohmann::json to_json(const RetargetConfig& cfg);
// Missing fields keep their defaults; the correspondence defaults to
// default_correspondence(chain).
RetargetConfig retarget_config_from_json(const nlohmann::json& j,
                                         const KinematicChain& chain,
                                         const std::string& path = "retarget");

struct FrameSolution {
  JointConfig q;
  double residual = 0.0;  // objective value at q
  bool converged = true;
  int iterations = 0;
};

// Minimizes sum_k w_k ||(f_k(q) - o) - alpha (h_k - o)||^2 subject to
// ||q - q_prev|| <= step_limit and the joint limits.
FrameSolution retarget_frame(const KinematicChain& chain, const RetargetConfig& cfg,
                             const HandKeypoints& hand, const Vec3& object,
                             const JointConfig& q_prev);

// Same objective with no step bound, started from `start`.
FrameSolution retarget_frame_unbounded(const KinematicChain& chain,
                                       const RetargetConfig& cfg,
                                       const HandKeypoints& hand, const Vec3& object,
                                       const JointConfig& start, int max_iters);

// Objective of retarget_frame evaluated at q.
double retarget_objective(const KinematicChain& chain, const RetargetConfig& cfg,
                          const HandKeypoints& hand, const Vec3& object,
                          const JointConfig& q);

enum class RetargetMethod { kPosition, kVector, kDexPilot };
RetargetMethod parse_retarget_method(const std::string& name);
std::string retarget_method_name(RetargetMethod method);

struct JointTrajectory {
  std::string chain;
  RetargetMethod method = RetargetMethod::kPosition;
  std::vector<JointConfig> configs;
  // primitive_actions[t] = configs[t] - configs[t-1]; the first entry is zero.
  std::vector<JointConfig> primitive_actions;
  std::vector<double> residuals;
  std::vector<bool> converged;

  std::size_t size() const { return configs.size(); }
};

// Frame 0 is solved without the step bound starting from q_init; every later
// frame warm starts from the previous solution.
JointTrajectory retarget_trajectory(const KinematicChain& chain,
                                    const RetargetConfig& cfg,
                                    const DemoTrajectory& traj,
                                    const JointConfig& q_init);

// Baselines: arm joints track the demo wrist motion relative to frame 0 by
// damped least squares; hand joints match wrist-to-fingertip vectors
// (plus fingertip-pair vectors for DexPilot). Residuals report the hand
// objective.
JointTrajectory vector_retarget(const KinematicChain& chain, const RetargetConfig& cfg,
                                const DemoTrajectory& traj, const JointConfig& q_init);
JointTrajectory dexpilot_retarget(const KinematicChain& chain,
                                  const RetargetConfig& cfg,
                                  const DemoTrajectory& traj,
                                  const JointConfig& q_init);

JointTrajectory run_retargeter(RetargetMethod method, const KinematicChain& chain,
                               const RetargetConfig& cfg, const DemoTrajectory& traj,
                               const JointConfig& q_init);

std::string serialize_joint_trajectory(const JointTrajectory& jt,
                                       const RetargetConfig& cfg);
JointTrajectory parse_joint_trajectory(const std::string& text);
void save_joint_trajectory(const JointTrajectory& jt, const RetargetConfig& cfg,
                           const std::string& path);
JointTrajectory load_joint_trajectory(const std::string& path);

}  // namespace handxfer
