#include "handxfer/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"

namespace handxfer {

namespace {

constexpr double kUnitTol = 1e-9;

const char* kind_name(JointKind k) {
  return k == JointKind::kRevolute ? "revolute" : "prismatic";
}

const char* group_name(JointGroup g) {
  return g == JointGroup::kArm ? "arm" : "hand";
}

RigidTransform joint_motion(const Joint& joint, double value) {
  if (joint.kind == JointKind::kRevolute) {
    return RigidTransform::from_rotation(
        Quat(Eigen::AngleAxisd(value, joint.axis)));
  }
  return RigidTransform::from_translation(joint.axis * value);
}

}  // namespace

KinematicChain::KinematicChain(ChainDescription desc) : desc_(std::move(desc)) {
  if (desc_.links.empty()) throw SemanticError("chain has no links");

  for (std::size_t i = 0; i < desc_.links.size(); ++i) {
    if (!link_lookup_.emplace(desc_.links[i], static_cast<int>(i)).second) {
      throw SemanticError("duplicate link '" + desc_.links[i] + "'");
    }
  }

  const int n_links = static_cast<int>(desc_.links.size());
  const int n_joints = static_cast<int>(desc_.joints.size());
  parent_joint_.assign(n_links, -1);
  joint_parent_.resize(n_joints);
  joint_child_.resize(n_joints);

  std::unordered_map<std::string, int> joint_names;
  for (int j = 0; j < n_joints; ++j) {
    Joint& joint = desc_.joints[j];
    if (!joint_names.emplace(joint.name, j).second) {
      throw SemanticError("duplicate joint '" + joint.name + "'");
    }
    auto parent = link_lookup_.find(joint.parent_link);
    if (parent == link_lookup_.end()) {
      throw SemanticError("joint '" + joint.name +
                          "' references undefined link '" + joint.parent_link +
                          "'");
    }
    auto child = link_lookup_.find(joint.child_link);
    if (child == link_lookup_.end()) {
      throw SemanticError("joint '" + joint.name +
                          "' references undefined link '" + joint.child_link +
                          "'");
    }
    if (std::abs(joint.axis.norm() - 1.0) > kUnitTol) {
      throw SemanticError("joint '" + joint.name + "' axis is not unit length");
    }
    if (!(joint.lower <= joint.upper)) {
      throw SemanticError("joint '" + joint.name + "' has inverted limits");
    }
    if (parent_joint_[child->second] != -1) {
      throw SemanticError("link '" + joint.child_link +
                          "' is the child of more than one joint");
    }
    parent_joint_[child->second] = j;
    joint_parent_[j] = parent->second;
    joint_child_[j] = child->second;
  }

  int roots = 0;
  for (int l = 0; l < n_links; ++l) {
    if (parent_joint_[l] == -1) {
      base_link_ = l;
      ++roots;
    }
  }
  if (roots == 0) {
    throw SemanticError("joint cycle: no base link (every link has a parent)");
  }
  if (roots > 1) {
    std::string names;
    for (int l = 0; l < n_links; ++l) {
      if (parent_joint_[l] == -1) names += (names.empty() ? "" : ", ") + desc_.links[l];
    }
    throw SemanticError("chain must have a single base link, found: " + names);
  }

  // Walk from the base; links never reached sit on a cycle.
  std::vector<std::vector<int>> children(n_links);
  for (int j = 0; j < n_joints; ++j) children[joint_parent_[j]].push_back(j);
  ancestors_.assign(n_links, {});
  std::vector<bool> reached(n_links, false);
  std::vector<int> stack{base_link_};
  reached[base_link_] = true;
  while (!stack.empty()) {
    const int link = stack.back();
    stack.pop_back();
    for (int j : children[link]) {
      const int child = joint_child_[j];
      if (reached[child]) {
        throw SemanticError("joint cycle through link '" + desc_.links[child] + "'");
      }
      reached[child] = true;
      topo_.push_back(j);
      ancestors_[child] = ancestors_[link];
      ancestors_[child].push_back(j);
      stack.push_back(child);
    }
  }
  for (int l = 0; l < n_links; ++l) {
    if (!reached[l]) {
      throw SemanticError("joint cycle through link '" + desc_.links[l] + "'");
    }
  }

  keypoint_link_.reserve(desc_.keypoints.size());
  for (std::size_t k = 0; k < desc_.keypoints.size(); ++k) {
    const Keypoint& kp = desc_.keypoints[k];
    auto link = link_lookup_.find(kp.link);
    if (link == link_lookup_.end()) {
      throw SemanticError("keypoint '" + kp.id + "' references undefined link '" +
                          kp.link + "'");
    }
    if (!keypoint_lookup_.emplace(kp.id, static_cast<int>(k)).second) {
      throw SemanticError("duplicate keypoint '" + kp.id + "'");
    }
    keypoint_link_.push_back(link->second);
  }

  if (!desc_.fingertips.empty() && desc_.fingertips.size() != 5) {
    throw SemanticError("chain must list exactly 5 fingertips or none, got " +
                        std::to_string(desc_.fingertips.size()));
  }
  for (const std::string& id : desc_.fingertips) {
    auto it = keypoint_lookup_.find(id);
    if (it == keypoint_lookup_.end()) {
      throw SemanticError("fingertip '" + id + "' is not a keypoint");
    }
    fingertips_.push_back(it->second);
  }
  if (desc_.wrist) {
    auto it = keypoint_lookup_.find(*desc_.wrist);
    if (it == keypoint_lookup_.end()) {
      throw SemanticError("wrist '" + *desc_.wrist + "' is not a keypoint");
    }
    wrist_ = it->second;
  }
}

int KinematicChain::keypoint_index(const std::string& id) const {
  auto it = keypoint_lookup_.find(id);
  if (it == keypoint_lookup_.end()) {
    throw SemanticError("unknown keypoint '" + id + "'");
  }
  return it->second;
}

bool KinematicChain::has_keypoint(const std::string& id) const {
  return keypoint_lookup_.contains(id);
}

int KinematicChain::link_index(const std::string& name) const {
  auto it = link_lookup_.find(name);
  if (it == link_lookup_.end()) throw SemanticError("unknown link '" + name + "'");
  return it->second;
}

Eigen::VectorXd KinematicChain::lower_limits() const {
  Eigen::VectorXd v(dof());
  for (int j = 0; j < dof(); ++j) v[j] = desc_.joints[j].lower;
  return v;
}

Eigen::VectorXd KinematicChain::upper_limits() const {
  Eigen::VectorXd v(dof());
  for (int j = 0; j < dof(); ++j) v[j] = desc_.joints[j].upper;
  return v;
}

JointConfig KinematicChain::clamp_to_limits(const JointConfig& q) const {
  JointConfig out = q;
  for (int j = 0; j < dof(); ++j) {
    out[j] = std::clamp(out[j], desc_.joints[j].lower, desc_.joints[j].upper);
  }
  return out;
}

std::vector<bool> KinematicChain::group_mask(JointGroup group) const {
  std::vector<bool> mask(desc_.joints.size());
  for (std::size_t j = 0; j < mask.size(); ++j) {
    mask[j] = desc_.joints[j].group == group;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Chain document

KinematicChain parse_chain(const std::string& text) {
  using json_io::ObjectReader;
  const json_io::Json doc = json_io::parse(text);
  ObjectReader root(doc, "");
  ChainDescription desc;
  desc.name = root.string("name");

  const auto& links = root.required("links");
  if (!links.is_array()) throw SchemaError("links", "expected an array");
  for (std::size_t i = 0; i < links.size(); ++i) {
    ObjectReader r(links[i], "links[" + std::to_string(i) + "]");
    desc.links.push_back(r.string("name"));
    r.finish();
  }

  const auto& joints = root.required("joints");
  if (!joints.is_array()) throw SchemaError("joints", "expected an array");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    ObjectReader r(joints[i], "joints[" + std::to_string(i) + "]");
    Joint joint;
    joint.name = r.string("name");
    const std::string kind = r.string("kind");
    if (kind == "revolute") {
      joint.kind = JointKind::kRevolute;
    } else if (kind == "prismatic") {
      joint.kind = JointKind::kPrismatic;
    } else {
      throw SchemaError(r.child_path("kind"),
                        "unknown joint kind '" + kind + "' in joint '" +
                            joint.name + "'");
    }
    joint.parent_link = r.string("parent");
    joint.child_link = r.string("child");
    joint.origin = json_io::as_pose(r.required("origin"), r.child_path("origin"));
    joint.axis = json_io::as_vec3(r.required("axis"), r.child_path("axis"));
    const auto lim = json_io::as_numbers(r.required("limits"),
                                         r.child_path("limits"), 2);
    joint.lower = lim[0];
    joint.upper = lim[1];
    if (const auto* g = r.optional("group")) {
      if (*g == "arm") {
        joint.group = JointGroup::kArm;
      } else if (*g == "hand") {
        joint.group = JointGroup::kHand;
      } else {
        throw SchemaError(r.child_path("group"), "expected \"arm\" or \"hand\"");
      }
    }
    r.finish();
    desc.joints.push_back(std::move(joint));
  }

  const auto& keypoints = root.required("keypoints");
  if (!keypoints.is_array()) throw SchemaError("keypoints", "expected an array");
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    ObjectReader r(keypoints[i], "keypoints[" + std::to_string(i) + "]");
    Keypoint kp;
    kp.id = r.string("id");
    kp.link = r.string("link");
    kp.offset = json_io::as_pose(r.required("offset"), r.child_path("offset"));
    r.finish();
    desc.keypoints.push_back(std::move(kp));
  }

  static const json_io::Json kNoTips = json_io::Json::array();
  const json_io::Json* tips_ptr = root.optional("fingertips");
  const auto& tips = tips_ptr ? *tips_ptr : kNoTips;
  if (!tips.is_array()) throw SchemaError("fingertips", "expected an array");
  for (std::size_t i = 0; i < tips.size(); ++i) {
    if (!tips[i].is_string()) {
      throw SchemaError("fingertips[" + std::to_string(i) + "]", "expected a string");
    }
    desc.fingertips.push_back(tips[i].get<std::string>());
  }
  if (root.has("wrist")) desc.wrist = root.string("wrist");
  root.finish();
  return KinematicChain(std::move(desc));
}

KinematicChain load_chain(const std::string& path) {
  return parse_chain(json_io::read_file(path));
}

std::string serialize_chain(const KinematicChain& chain) {
  using json_io::Json;
  const ChainDescription& d = chain.description();
  Json doc;
  doc["name"] = d.name;
  Json links = Json::array();
  for (const auto& l : d.links) links.push_back(Json{{"name", l}});
  doc["links"] = std::move(links);
  Json joints = Json::array();
  for (const Joint& j : d.joints) {
    joints.push_back(Json{{"name", j.name},
                          {"kind", kind_name(j.kind)},
                          {"parent", j.parent_link},
                          {"child", j.child_link},
                          {"origin", json_io::to_json(j.origin)},
                          {"axis", json_io::to_json(j.axis)},
                          {"limits", Json::array({j.lower, j.upper})},
                          {"group", group_name(j.group)}});
  }
  doc["joints"] = std::move(joints);
  Json kps = Json::array();
  for (const Keypoint& k : d.keypoints) {
    kps.push_back(Json{{"id", k.id},
                       {"link", k.link},
                       {"offset", json_io::to_json(k.offset)}});
  }
  doc["keypoints"] = std::move(kps);
  doc["fingertips"] = d.fingertips;
  if (d.wrist) doc["wrist"] = *d.wrist;
  return json_io::dump(doc);
}

// ---------------------------------------------------------------------------
// Forward kinematics and Jacobians

std::vector<RigidTransform> link_poses(const KinematicChain& chain,
                                       const JointConfig& q) {
  if (q.size() != chain.dof()) {
    throw DimensionError("joint config has " + std::to_string(q.size()) +
                         " values, chain dof is " + std::to_string(chain.dof()));
  }
  std::vector<RigidTransform> poses(chain.links().size());
  for (int j : chain.topological_joints()) {
    const Joint& joint = chain.joints()[j];
    poses[chain.joint_child_link(j)] = poses[chain.joint_parent_link(j)] *
                                       joint.origin * joint_motion(joint, q[j]);
  }
  return poses;
}

KeypointPositions forward_kinematics(const KinematicChain& chain,
                                     const JointConfig& q) {
  const auto poses = link_poses(chain, q);
  std::vector<Vec3> out;
  out.reserve(chain.keypoints().size());
  for (std::size_t k = 0; k < chain.keypoints().size(); ++k) {
    out.push_back(poses[chain.keypoint_link(static_cast<int>(k))].apply(
        chain.keypoints()[k].offset.translation()));
  }
  return {chain, std::move(out)};
}

namespace {

// World-frame joint axes and anchor points for configuration q.
struct JointFrames {
  std::vector<Vec3> axis;
  std::vector<Vec3> anchor;
};

JointFrames joint_frames(const KinematicChain& chain,
                         const std::vector<RigidTransform>& poses) {
  JointFrames f;
  f.axis.resize(chain.dof());
  f.anchor.resize(chain.dof());
  for (int j = 0; j < chain.dof(); ++j) {
    const Joint& joint = chain.joints()[j];
    const RigidTransform frame = poses[chain.joint_parent_link(j)] * joint.origin;
    f.axis[j] = frame.rotate(joint.axis);
    f.anchor[j] = frame.translation();
  }
  return f;
}

void fill_linear_columns(const KinematicChain& chain, const JointFrames& f,
                         int link, const Vec3& p, Matrix3X& jac) {
  jac.setZero(3, chain.dof());
  for (int j : chain.ancestor_joints(link)) {
    if (chain.joints()[j].kind == JointKind::kRevolute) {
      jac.col(j) = f.axis[j].cross(p - f.anchor[j]);
    } else {
      jac.col(j) = f.axis[j];
    }
  }
}

}  // namespace

Matrix3X keypoint_jacobian(const KinematicChain& chain, const JointConfig& q,
                           const std::string& keypoint_id) {
  const int k = chain.keypoint_index(keypoint_id);
  const int idx[] = {k};
  return keypoint_jacobians(chain, q, idx).jacobians.front();
}

KeypointJacobians keypoint_jacobians(const KinematicChain& chain,
                                     const JointConfig& q,
                                     std::span<const int> keypoints) {
  const auto poses = link_poses(chain, q);
  const JointFrames f = joint_frames(chain, poses);
  KeypointJacobians out;
  out.positions.reserve(keypoints.size());
  out.jacobians.reserve(keypoints.size());
  for (int k : keypoints) {
    const int link = chain.keypoint_link(k);
    const Vec3 p = poses[link].apply(chain.keypoints()[k].offset.translation());
    Matrix3X jac;
    fill_linear_columns(chain, f, link, p, jac);
    out.positions.push_back(p);
    out.jacobians.push_back(std::move(jac));
  }
  return out;
}

RigidTransform keypoint_pose(const KinematicChain& chain, const JointConfig& q,
                             int keypoint) {
  const auto poses = link_poses(chain, q);
  return poses[chain.keypoint_link(keypoint)] * chain.keypoints()[keypoint].offset;
}

Matrix6X keypoint_frame_jacobian(const KinematicChain& chain,
                                 const JointConfig& q, int keypoint) {
  const auto poses = link_poses(chain, q);
  const JointFrames f = joint_frames(chain, poses);
  const int link = chain.keypoint_link(keypoint);
  const Vec3 p = poses[link].apply(chain.keypoints()[keypoint].offset.translation());
  Matrix6X jac = Matrix6X::Zero(6, chain.dof());
  for (int j : chain.ancestor_joints(link)) {
    if (chain.joints()[j].kind == JointKind::kRevolute) {
      jac.block<3, 1>(0, j) = f.axis[j].cross(p - f.anchor[j]);
      jac.block<3, 1>(3, j) = f.axis[j];
    } else {
      jac.block<3, 1>(0, j) = f.axis[j];
    }
  }
  return jac;
}

}  // namespace handxfer
