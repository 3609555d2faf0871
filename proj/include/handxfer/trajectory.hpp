#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handxfer/kinematics.hpp"
#include "handxfer/transform.hpp"

namespace handxfer {

// Human hand keypoint layout, version 1: wrist at row 0, then four rows per
// finger (knuckle, middle, distal, tip) for thumb, index, middle, ring,
// pinky. Fingertips sit at rows 4, 8, 12, 16, 20.
inline constexpr int kHandLayoutVersion = 1;
inline constexpr int kHandKeypoints = 21;
inline constexpr int kWristRow = 0;
inline constexpr std::array<int, 5> kFingertipRows = {4, 8, 12, 16, 20};

// Keypoint id for a layout row: "wrist", "thumb_knuckle", ..., "pinky_tip".
// Robot chains that mirror the human layout use the same ids.
std::string hand_keypoint_name(int row);

using HandKeypoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct DemoFrame {
  HandKeypoints hand_keypoints;  // K x 3, meters
  RigidTransform wrist_pose;
  RigidTransform object_pose;
};

struct DemoTrajectory {
  std::vector<DemoFrame> frames;
  double dt = 0.1;
  std::optional<int> lift_index;
  std::string object_ref;
  int layout_version = kHandLayoutVersion;

  std::size_t size() const { return frames.size(); }
};

// Throws SemanticError when an invariant does not hold.
void validate(const DemoTrajectory& traj);

DemoTrajectory parse_trajectory(const std::string& text);
std::string serialize_trajectory(const DemoTrajectory& traj);
DemoTrajectory load_trajectory(const std::string& path);
void save_trajectory(const DemoTrajectory& traj, const std::string& path);

// Surface point cloud of an object, expressed in the object frame.
struct ObjectModel {
  std::string id;
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> points;
  double scale = 1.0;
  double bounding_radius = 0.0;
};

void validate(const ObjectModel& model);
ObjectModel parse_object_model(const std::string& text);
std::string serialize_object_model(const ObjectModel& model);
ObjectModel load_object_model(const std::string& path);
void save_object_model(const ObjectModel& model, const std::string& path);

// Analytic primitive used to generate synthetic objects and demos.
struct ObjectShape {
  enum class Kind { kSphere, kBox, kCylinder };
  Kind kind = Kind::kSphere;
  // Sphere: x = radius. Box: half extents. Cylinder: x = radius, z = half
  // height (axis along object z).
  Vec3 size = Vec3(0.04, 0.04, 0.04);

  // Signed distance in the object frame, negative inside.
  double signed_distance(const Vec3& p) const;
  // Height of the object center when resting upright on z = 0.
  double rest_height() const;
  // Near-uniform deterministic surface sampling with about `points` points.
  ObjectModel sample(const std::string& id, int points) const;
};

ObjectShape::Kind parse_shape_kind(const std::string& name);
std::string shape_kind_name(ObjectShape::Kind kind);

// Rotation about the gravity axis (+z) by `yaw`, then translation.
struct WorkspaceTransform {
  double yaw = 0.0;
  Vec3 translation = Vec3::Zero();

  RigidTransform to_rigid() const;
};

// second o first.
WorkspaceTransform compose(const WorkspaceTransform& second,
                           const WorkspaceTransform& first);

DemoTrajectory augment(const DemoTrajectory& traj, const WorkspaceTransform& t);

struct Workspace {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  double yaw_min = 0.0;
  double yaw_max = 0.0;
};

struct Augmentation {
  WorkspaceTransform transform;
  DemoTrajectory trajectory;
};

// Draws `count` transforms: yaw uniform in the yaw range and the initial
// object position uniform in the box. Deterministic for a given seed.
std::vector<Augmentation> sample_augmentations(const DemoTrajectory& traj,
                                               int count,
                                               const Workspace& workspace,
                                               std::uint64_t seed);

// Inserts linearly interpolated frames (slerp for rotations) so that no two
// consecutive frames move the wrist further than `max_wrist_step` meters.
// `inserted`, if given, receives the number of frames added after each
// original frame.
DemoTrajectory limit_wrist_speed(const DemoTrajectory& traj,
                                 double max_wrist_step,
                                 std::vector<int>* inserted = nullptr);

// First frame whose object height exceeds the first frame's by `threshold`.
std::optional<int> detect_lift_index(const DemoTrajectory& traj,
                                     double threshold);

// Script of a synthetic reach / close / lift / follow demonstration.
struct SynthSpec {
  ObjectShape shape;
  std::string object_id = "sphere";
  Eigen::Vector2d object_xy = Eigen::Vector2d(0.5, 0.0);
  double object_yaw = 0.0;
  double hand_yaw = 0.0;
  int reach_frames = 20;
  int close_frames = 15;
  int lift_frames = 6;
  int follow_frames = 20;
  double lift_height = 0.10;
  double approach_height = 0.12;
  double approach_offset = 0.05;   // horizontal start jitter magnitude
  double hand_yaw_jitter = 0.2;
  double follow_distance = 0.10;
  double follow_yaw = 0.3;
  double palm_clearance = 0.09;    // palm height above the object center
  double open_angle = -0.1;
  double flex_ratio = 1.0;         // distal / proximal flexion
  double pad_offset = 0.001;       // fingertip standoff from the surface
  double alpha = 1.6;
  double dt = 0.1;
  double reach_radius = 0.85;
  double joint_step_cap = 0.12;    // per-frame joint-space step bound
  double max_wrist_step = 0.02;
  double lift_threshold = 0.02;
  int object_points = 1024;
};

struct SynthResult {
  DemoTrajectory demo;
  ObjectModel object;
  // Robot configuration that produced each frame (matched morphology).
  std::vector<JointConfig> robot_configs;
};

// Requires the toy-hand joint layout (arm_x, arm_y, arm_z, arm_yaw, then
// <finger>_j1/<finger>_j2 per finger). Human keypoints are the robot
// keypoints scaled by 1/alpha about the object position, so the chain
// reproduces the demo exactly under retargeting with the same alpha.
SynthResult synth_demo(const KinematicChain& chain, const SynthSpec& spec,
                       std::uint64_t seed);

}  // namespace handxfer
