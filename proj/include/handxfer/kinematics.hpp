#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "handxfer/transform.hpp"

namespace handxfer {

using JointConfig = Eigen::VectorXd;
using Matrix3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Matrix6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

enum class JointKind { kRevolute, kPrismatic };
enum class JointGroup { kArm, kHand };

struct Joint {
  std::string name;
  JointKind kind = JointKind::kRevolute;
  std::string parent_link;
  std::string child_link;
  RigidTransform origin;  // parent link frame -> joint frame at q = 0
  Vec3 axis = Vec3::UnitZ();
  double lower = 0.0;
  double upper = 0.0;
  JointGroup group = JointGroup::kHand;
};

struct Keypoint {
  std::string id;
  std::string link;
  RigidTransform offset;
};

// Everything a chain document describes, before validation.
struct ChainDescription {
  std::string name;
  std::vector<std::string> links;
  std::vector<Joint> joints;
  std::vector<Keypoint> keypoints;
  std::vector<std::string> fingertips;
  std::optional<std::string> wrist;
};

// Articulated tree of joints with named keypoints. Immutable once built;
// the constructor checks every structural invariant and throws
// SemanticError naming the offending entity.
class KinematicChain {
 public:
  explicit KinematicChain(ChainDescription desc);

  const std::string& name() const { return desc_.name; }
  int dof() const { return static_cast<int>(desc_.joints.size()); }
  const std::vector<Joint>& joints() const { return desc_.joints; }
  const std::vector<std::string>& links() const { return desc_.links; }
  const std::vector<Keypoint>& keypoints() const { return desc_.keypoints; }
  const ChainDescription& description() const { return desc_; }
  const std::string& base_link() const { return desc_.links[base_link_]; }

  int keypoint_index(const std::string& id) const;  // throws on unknown id
  bool has_keypoint(const std::string& id) const;
  int link_index(const std::string& name) const;    // throws on unknown link

  // Keypoint indices of the five fingertips, in file order (m = 0..4).
  // Empty for chains that are not hands.
  const std::vector<int>& fingertip_indices() const { return fingertips_; }
  // Keypoint index of the wrist, if the document names one.
  std::optional<int> wrist_index() const { return wrist_; }

  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
  JointConfig clamp_to_limits(const JointConfig& q) const;
  // Mask over joints: true for joints in `group`.
  std::vector<bool> group_mask(JointGroup group) const;

  // Internal topology, used by the FK/Jacobian routines.
  int keypoint_link(int keypoint) const { return keypoint_link_[keypoint]; }
  // Joint driving `link`, or -1 for the base link.
  int parent_joint(int link) const { return parent_joint_[link]; }
  // Parent link of joint j.
  int joint_parent_link(int j) const { return joint_parent_[j]; }
  int joint_child_link(int j) const { return joint_child_[j]; }
  // Joints in an order where parents precede children.
  const std::vector<int>& topological_joints() const { return topo_; }
  // Joints on the path from the base to `link`.
  const std::vector<int>& ancestor_joints(int link) const {
    return ancestors_[link];
  }

 private:
  ChainDescription desc_;
  int base_link_ = 0;
  std::unordered_map<std::string, int> link_lookup_;
  std::unordered_map<std::string, int> keypoint_lookup_;
  std::vector<int> keypoint_link_;
  std::vector<int> parent_joint_;
  std::vector<int> joint_parent_;
  std::vector<int> joint_child_;
  std::vector<int> topo_;
  std::vector<std::vector<int>> ancestors_;
  std::vector<int> fingertips_;
  std::optional<int> wrist_;
};

// Reads a chain document (format described in docs/formats.md).
KinematicChain parse_chain(const std::string& text);
KinematicChain load_chain(const std::string& path);
std::string serialize_chain(const KinematicChain& chain);

// World pose of every link for configuration q. Out-of-limit values are
// accepted; FK is pure geometry.
std::vector<RigidTransform> link_poses(const KinematicChain& chain,
                                       const JointConfig& q);

// Keypoint positions in the base frame, indexed like chain.keypoints().
class KeypointPositions {
 public:
  KeypointPositions(const KinematicChain& chain, std::vector<Vec3> positions)
      : chain_(&chain), positions_(std::move(positions)) {}

  const Vec3& operator[](int index) const { return positions_[index]; }
  const Vec3& at(const std::string& id) const {
    return positions_[chain_->keypoint_index(id)];
  }
  std::size_t size() const { return positions_.size(); }
  const std::vector<Vec3>& all() const { return positions_; }

 private:
  const KinematicChain* chain_;
  std::vector<Vec3> positions_;
};

KeypointPositions forward_kinematics(const KinematicChain& chain,
                                     const JointConfig& q);

// d(keypoint position)/dq, 3 x dof.
Matrix3X keypoint_jacobian(const KinematicChain& chain, const JointConfig& q,
                           const std::string& keypoint_id);

// Positions and Jacobians of a subset of keypoints from a single FK pass.
struct KeypointJacobians {
  std::vector<Vec3> positions;
  std::vector<Matrix3X> jacobians;
};
KeypointJacobians keypoint_jacobians(const KinematicChain& chain,
                                     const JointConfig& q,
                                     std::span<const int> keypoints);

// Pose of a keypoint frame (link pose composed with the keypoint offset).
RigidTransform keypoint_pose(const KinematicChain& chain, const JointConfig& q,
                             int keypoint);

// Geometric Jacobian of a keypoint frame: rows 0-2 linear, rows 3-5 angular.
Matrix6X keypoint_frame_jacobian(const KinematicChain& chain,
                                 const JointConfig& q, int keypoint);

}  // namespace handxfer
