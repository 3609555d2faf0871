#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "handxfer/kinematics.hpp"
#include "handxfer/retarget.hpp"
#include "handxfer/reward.hpp"
#include "handxfer/trajectory.hpp"

namespace handxfer {

struct EnvConfig {
  double dt = 0.1;
  double contact_radius = 0.003;
  int attach_min_contacts = 3;
  double attach_spread_min = 1.57;
  double lift_threshold = 0.02;
  double drop_distance = 0.15;
  double detection_noise = 0.005;
  int horizon = 4;             // goal lookahead frames
  double step_limit = 0.15;    // action norm bound, matches the retargeting bound
  double alpha = 1.6;          // hand scaling for goal fingertips
  double gravity = 9.81;
  bool observe_contacts = true;
};

void validate(const EnvConfig& cfg);
nlohmann::json to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const nlohmann::json& j, const std::string& path = "env");

// Per-episode detection noise: K x 3 Gaussian offsets with standard
// deviation cfg.detection_noise, a pure function of the seed.
HandKeypoints detection_noise(const EnvConfig& cfg, int keypoints, std::uint64_t seed);
// Adds the same offsets to every frame's hand keypoints.
DemoTrajectory apply_detection_noise(const DemoTrajectory& demo, const HandKeypoints& noise);

// scale, bounding radius, three principal-axis extents (meters, descending),
// and an 8-bin histogram of point radius / bounding radius (fractions).
inline constexpr int kDescriptorSize = 13;
Eigen::VectorXd object_descriptor(const ObjectModel& model);

// Everything fixed for one episode.
struct Episode {
  std::shared_ptr<const DemoTrajectory> demo;  // clean object path, clean hand
  std::shared_ptr<const ObjectModel> object;
  HandKeypoints noise;                          // frozen detection offsets
  JointTrajectory primitives;                   // retargeted from the noisy demo
  std::uint64_t seed = 0;
};

// Draws the detection noise for `seed`, retargets the noisy demo with
// `method` and packages the episode.
Episode make_episode(const KinematicChain& chain, const EnvConfig& env_cfg,
                     const RetargetConfig& retarget_cfg, RetargetMethod method,
                     std::shared_ptr<const DemoTrajectory> demo,
                     std::shared_ptr<const ObjectModel> object, std::uint64_t seed);

struct EnvState {
  JointConfig q;
  RigidTransform object_pose;
  bool attached = false;
  std::array<bool, 5> contacts{};
  int t = 0;
  bool terminated = false;
  // Bookkeeping for the object model.
  RigidTransform object_in_palm;
  double fall_speed = 0.0;
  double support_height = 0.0;
  bool ever_attached = false;
  bool lifted = false;
  bool detached_after_attach = false;
};

struct StepInfo {
  bool grasp = false;   // attachment happened on this step
  bool lift = false;    // object first rose past the lift threshold while held
  bool drop = false;    // detachment or path departure on this step
  bool followed = false;  // terminal step of a successful follow
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Observation layout, in order:
//   descriptor (13) | object position (3) + quaternion wxyz (4) | q (dof) |
//   fingertips - object (15) | contacts (5) |
//   goal fingertips for frames t..t+h-1 (15h) |
//   demo object positions for frames t+1..t+h minus current object (3h)
// Frames past the demo end repeat the last frame.
struct ObservationLayout {
  int dof = 0;
  int horizon = 1;
  int descriptor = 0;
  int object = 0;
  int joints = 0;
  int fingertips = 0;
  int contacts = 0;
  int goal_hand = 0;
  int goal_object = 0;
  int size = 0;
};
ObservationLayout observation_layout(int dof, int horizon);

// Per-frame record of an episode.
struct TraceFrame {
  int t = 0;
  JointConfig q;
  RigidTransform object_pose;
  std::array<bool, 5> contacts{};
  bool attached = false;
  double reward = 0.0;
  StepInfo info;
};

struct EpisodeTrace {
  std::string object_ref;
  std::uint64_t seed = 0;
  std::vector<TraceFrame> frames;
};

std::string serialize_trace(const EpisodeTrace& trace);
EpisodeTrace parse_trace(const std::string& text);

// Kinematic grasp-and-follow environment. Single owner; create one per
// concurrent episode.
class GraspEnv {
 public:
  GraspEnv(const KinematicChain& chain, EnvConfig cfg, RewardParams reward);

  const EnvConfig& config() const { return cfg_; }
  const RewardParams& reward_params() const { return reward_; }
  const KinematicChain& chain() const { return *chain_; }
  const ObservationLayout& layout() const { return layout_; }

  Eigen::VectorXd reset(const Episode& episode);
  StepResult step(const JointConfig& action);
  Eigen::VectorXd observe() const;

  const EnvState& state() const { return state_; }
  const Episode& episode() const { return *episode_; }
  const EpisodeTrace& trace() const { return trace_; }
  int switch_time() const { return t0_; }
  int last_frame() const { return static_cast<int>(episode_->demo->size()) - 1; }

  // Primitive action for the step leaving the current frame.
  JointConfig primitive_action() const;

  // Scaled noisy demo fingertips and clean demo object position at frame t
  // (clamped to the demo).
  Fingertips goal_fingertips(int t) const;
  Vec3 demo_object(int t) const;
  Fingertips fingertips() const;

 private:
  void update_contacts();
  void record(double reward, const StepInfo& info);

  const KinematicChain* chain_;
  EnvConfig cfg_;
  RewardParams reward_;
  ObservationLayout layout_;
  int palm_;
  std::array<int, 5> tips_{};

  const Episode* episode_ = nullptr;
  Episode episode_copy_;
  Eigen::VectorXd descriptor_;
  std::vector<Fingertips> goal_tips_;
  int t0_ = 0;
  EnvState state_;
  EpisodeTrace trace_;
};

}  // namespace handxfer
