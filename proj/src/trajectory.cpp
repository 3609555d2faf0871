#include "handxfer/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"
#include "handxfer/random.hpp"

namespace handxfer {

using json_io::Json;
using json_io::ObjectReader;

// ---------------------------------------------------------------------------
// Validation

void validate(const DemoTrajectory& traj) {
  if (traj.frames.empty()) throw SemanticError("trajectory has no frames");
  if (!(traj.dt > 0.0) || !std::isfinite(traj.dt)) {
    throw SemanticError("trajectory dt must be positive");
  }
  if (traj.lift_index &&
      (*traj.lift_index < 0 ||
       *traj.lift_index >= static_cast<int>(traj.frames.size()))) {
    throw SemanticError("lift_index " + std::to_string(*traj.lift_index) +
                        " outside [0, " + std::to_string(traj.frames.size()) + ")");
  }
  const Eigen::Index k = traj.frames.front().hand_keypoints.rows();
  if (k < 6) {
    throw SemanticError("trajectory needs at least 6 hand keypoints, got " +
                        std::to_string(k));
  }
  for (std::size_t i = 0; i < traj.frames.size(); ++i) {
    const DemoFrame& f = traj.frames[i];
    const std::string where = "frames[" + std::to_string(i) + "]";
    if (f.hand_keypoints.rows() != k) {
      throw SemanticError(where + " has a different keypoint count");
    }
    if (!f.hand_keypoints.allFinite() || !f.wrist_pose.translation().allFinite() ||
        !f.wrist_pose.rotation().coeffs().allFinite() ||
        !f.object_pose.translation().allFinite() ||
        !f.object_pose.rotation().coeffs().allFinite()) {
      throw SemanticError(where + " contains a non-finite value");
    }
  }
}

void validate(const ObjectModel& model) {
  if (model.points.rows() < 16) {
    throw SemanticError("object '" + model.id + "' needs at least 16 points");
  }
  if (!(model.scale > 0.0)) {
    throw SemanticError("object '" + model.id + "' scale must be positive");
  }
  if (!model.points.allFinite()) {
    throw SemanticError("object '" + model.id + "' has non-finite points");
  }
  const double max_norm = model.points.rowwise().norm().maxCoeff();
  if (model.bounding_radius < max_norm) {
    throw SemanticError("object '" + model.id +
                        "' bounding_radius is smaller than its farthest point");
  }
}

// ---------------------------------------------------------------------------
// Trajectory file

DemoTrajectory parse_trajectory(const std::string& text) {
  const Json doc = json_io::parse(text);
  ObjectReader root(doc, "");
  DemoTrajectory traj;
  traj.layout_version = static_cast<int>(root.integer("layout_version"));
  if (traj.layout_version != kHandLayoutVersion) {
    throw SchemaError("layout_version", "unsupported keypoint layout version " +
                                            std::to_string(traj.layout_version));
  }
  traj.dt = root.number("dt");
  traj.object_ref = root.string("object_ref");
  if (const Json* lift = root.optional("lift_index"); lift && !lift->is_null()) {
    if (!lift->is_number_integer()) {
      throw SchemaError("lift_index", "expected an integer or null");
    }
    traj.lift_index = lift->get<int>();
  }
  const long long k = root.integer("keypoint_count");
  if (k < 1) throw SchemaError("keypoint_count", "must be positive");

  const Json& frames = root.required("frames");
  if (!frames.is_array()) throw SchemaError("frames", "expected an array");
  traj.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    ObjectReader fr(frames[i], "frames[" + std::to_string(i) + "]");
    DemoFrame frame;
    const auto flat = json_io::as_numbers(fr.required("hand_keypoints"),
                                          fr.child_path("hand_keypoints"),
                                          static_cast<std::size_t>(k * 3));
    frame.hand_keypoints.resize(k, 3);
    std::copy(flat.begin(), flat.end(), frame.hand_keypoints.data());
    frame.wrist_pose =
        json_io::as_pose(fr.required("wrist_pose"), fr.child_path("wrist_pose"));
    frame.object_pose =
        json_io::as_pose(fr.required("object_pose"), fr.child_path("object_pose"));
    fr.finish();
    traj.frames.push_back(std::move(frame));
  }
  root.finish();
  validate(traj);
  return traj;
}

std::string serialize_trajectory(const DemoTrajectory& traj) {
  validate(traj);
  Json doc;
  doc["layout_version"] = traj.layout_version;
  doc["dt"] = traj.dt;
  doc["object_ref"] = traj.object_ref;
  doc["lift_index"] = traj.lift_index ? Json(*traj.lift_index) : Json(nullptr);
  doc["keypoint_count"] = traj.frames.front().hand_keypoints.rows();
  Json frames = Json::array();
  for (const DemoFrame& f : traj.frames) {
    const double* data = f.hand_keypoints.data();
    frames.push_back(
        Json{{"hand_keypoints",
              std::vector<double>(data, data + f.hand_keypoints.size())},
             {"wrist_pose", json_io::to_json(f.wrist_pose)},
             {"object_pose", json_io::to_json(f.object_pose)}});
  }
  doc["frames"] = std::move(frames);
  return doc.dump() + "\n";
}

DemoTrajectory load_trajectory(const std::string& path) {
  return parse_trajectory(json_io::read_file(path));
}

void save_trajectory(const DemoTrajectory& traj, const std::string& path) {
  json_io::write_file(path, serialize_trajectory(traj));
}

// ---------------------------------------------------------------------------
// Object model file

ObjectModel parse_object_model(const std::string& text) {
  const Json doc = json_io::parse(text);
  ObjectReader root(doc, "");
  ObjectModel model;
  model.id = root.string("id");
  model.scale = root.number("scale");
  model.bounding_radius = root.number("bounding_radius");
  const Json& pts = root.required("points");
  if (!pts.is_array()) throw SchemaError("points", "expected an array");
  model.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    model.points.row(static_cast<Eigen::Index>(i)) =
        json_io::as_vec3(pts[i], "points[" + std::to_string(i) + "]").transpose();
  }
  root.finish();
  validate(model);
  return model;
}

std::string serialize_object_model(const ObjectModel& model) {
  validate(model);
  Json pts = Json::array();
  for (Eigen::Index i = 0; i < model.points.rows(); ++i) {
    pts.push_back(Json::array(
        {model.points(i, 0), model.points(i, 1), model.points(i, 2)}));
  }
  Json doc{{"id", model.id},
           {"scale", model.scale},
           {"bounding_radius", model.bounding_radius},
           {"points", std::move(pts)}};
  return doc.dump() + "\n";
}

ObjectModel load_object_model(const std::string& path) {
  return parse_object_model(json_io::read_file(path));
}

void save_object_model(const ObjectModel& model, const std::string& path) {
  json_io::write_file(path, serialize_object_model(model));
}

// ---------------------------------------------------------------------------
// Shapes

ObjectShape::Kind parse_shape_kind(const std::string& name) {
  if (name == "sphere") return ObjectShape::Kind::kSphere;
  if (name == "box") return ObjectShape::Kind::kBox;
  if (name == "cylinder") return ObjectShape::Kind::kCylinder;
  throw ConfigError("unknown shape '" + name +
                    "' (expected sphere, box or cylinder)");
}

std::string shape_kind_name(ObjectShape::Kind kind) {
  switch (kind) {
    case ObjectShape::Kind::kSphere:
      return "sphere";
    case ObjectShape::Kind::kBox:
      return "box";
    case ObjectShape::Kind::kCylinder:
      return "cylinder";
  }
  return "sphere";
}

double ObjectShape::signed_distance(const Vec3& p) const {
  switch (kind) {
    case Kind::kSphere:
      return p.norm() - size.x();
    case Kind::kBox: {
      const Vec3 d = p.cwiseAbs() - size;
      return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
    }
    case Kind::kCylinder: {
      const Eigen::Vector2d d(std::hypot(p.x(), p.y()) - size.x(),
                              std::abs(p.z()) - size.z());
      return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
    }
  }
  return 0.0;
}

double ObjectShape::rest_height() const {
  return kind == Kind::kSphere ? size.x() : size.z();
}

namespace {

// Grid over a rectangle [-a, a] x [-b, b] with about `n` cells, centers only.
void grid_face(double a, double b, int n,
               const std::function<void(double, double)>& emit) {
  const int nu = std::max(1, static_cast<int>(std::round(std::sqrt(n * a / b))));
  const int nv = std::max(1, static_cast<int>(std::round(static_cast<double>(n) / nu)));
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      emit(-a + (2.0 * i + 1.0) * a / nu, -b + (2.0 * j + 1.0) * b / nv);
    }
  }
}

// Vogel spiral over a disk of radius r.
void spiral_disk(double r, int n, const std::function<void(double, double)>& emit) {
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double rho = r * std::sqrt((i + 0.5) / n);
    emit(rho * std::cos(i * golden), rho * std::sin(i * golden));
  }
}

}  // namespace

ObjectModel ObjectShape::sample(const std::string& id, int points) const {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(points) + 64);
  switch (kind) {
    case Kind::kSphere: {
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < points; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / points;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        pts.push_back(size.x() * Vec3(r * std::cos(i * golden),
                                      r * std::sin(i * golden), z));
      }
      break;
    }
    case Kind::kBox: {
      const double ax = size.x(), ay = size.y(), az = size.z();
      const double total = 2.0 * (ax * ay + ay * az + ax * az);
      auto count = [&](double area) {
        return std::max(1, static_cast<int>(std::round(points * area / total)));
      };
      for (double s : {-1.0, 1.0}) {
        grid_face(ay, az, count(ay * az), [&](double u, double v) {
          pts.emplace_back(s * ax, u, v);
        });
        grid_face(ax, az, count(ax * az), [&](double u, double v) {
          pts.emplace_back(u, s * ay, v);
        });
        grid_face(ax, ay, count(ax * ay), [&](double u, double v) {
          pts.emplace_back(u, v, s * az);
        });
      }
      break;
    }
    case Kind::kCylinder: {
      const double r = size.x(), h = size.z();
      const double side = 2.0 * std::numbers::pi * r * 2.0 * h;
      const double cap = std::numbers::pi * r * r;
      const int n_side = static_cast<int>(std::round(points * side / (side + 2 * cap)));
      const int n_cap = std::max(1, (points - n_side) / 2);
      const double circumference = 2.0 * std::numbers::pi * r;
      const int n_theta = std::max(
          3, static_cast<int>(std::round(std::sqrt(n_side * circumference / (2 * h)))));
      const int n_z = std::max(1, n_side / n_theta);
      for (int i = 0; i < n_theta; ++i) {
        const double th = 2.0 * std::numbers::pi * (i + 0.5) / n_theta;
        for (int j = 0; j < n_z; ++j) {
          pts.emplace_back(r * std::cos(th), r * std::sin(th),
                           -h + (2.0 * j + 1.0) * h / n_z);
        }
      }
      for (double s : {-1.0, 1.0}) {
        spiral_disk(r, n_cap, [&](double x, double y) { pts.emplace_back(x, y, s * h); });
      }
      break;
    }
  }
  ObjectModel model;
  model.id = id;
  model.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    model.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  }
  model.scale = 1.0;
  model.bounding_radius = model.points.rowwise().norm().maxCoeff();
  return model;
}

// ---------------------------------------------------------------------------
// Augmentation

RigidTransform WorkspaceTransform::to_rigid() const {
  return {Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), translation};
}

WorkspaceTransform compose(const WorkspaceTransform& second,
                           const WorkspaceTransform& first) {
  const RigidTransform r2 = RigidTransform::from_rotation(
      Quat(Eigen::AngleAxisd(second.yaw, Vec3::UnitZ())));
  return {second.yaw + first.yaw, r2.rotate(first.translation) + second.translation};
}

DemoTrajectory augment(const DemoTrajectory& traj, const WorkspaceTransform& t) {
  validate(traj);
  const RigidTransform rigid = t.to_rigid();
  const Mat3 rot = rigid.rotation_matrix();
  DemoTrajectory out = traj;
  for (DemoFrame& f : out.frames) {
    for (Eigen::Index k = 0; k < f.hand_keypoints.rows(); ++k) {
      const Vec3 p = f.hand_keypoints.row(k).transpose();
      f.hand_keypoints.row(k) = (rot * p + t.translation).transpose();
    }
    f.wrist_pose = rigid * f.wrist_pose;
    f.object_pose = rigid * f.object_pose;
  }
  return out;
}

std::vector<Augmentation> sample_augmentations(const DemoTrajectory& traj,
                                               int count,
                                               const Workspace& workspace,
                                               std::uint64_t seed) {
  validate(traj);
  if (count < 1) throw ConfigError("augmentation count must be at least 1");
  for (int a = 0; a < 3; ++a) {
    if (!(workspace.min[a] <= workspace.max[a])) {
      throw ConfigError("empty workspace: box min exceeds max on axis " +
                        std::to_string(a));
    }
  }
  if (!(workspace.yaw_min <= workspace.yaw_max)) {
    throw ConfigError("empty workspace: yaw_min exceeds yaw_max");
  }
  const Vec3 start = traj.frames.front().object_pose.translation();
  if ((start.array() < workspace.min.array()).any() ||
      (start.array() > workspace.max.array()).any()) {
    throw ConfigError("workspace box does not contain the initial object position");
  }

  Rng rng = make_rng(seed, "augment");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Augmentation> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double yaw =
        workspace.yaw_min + unit(rng) * (workspace.yaw_max - workspace.yaw_min);
    Vec3 target;
    for (int a = 0; a < 3; ++a) {
      target[a] = workspace.min[a] + unit(rng) * (workspace.max[a] - workspace.min[a]);
    }
    WorkspaceTransform t;
    t.yaw = yaw;
    t.translation = target - t.to_rigid().rotate(start);
    out.push_back({t, augment(traj, t)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

// Number of equal sub-steps of at most `cap` covering `distance`; exact
// multiples do not round up.
int steps_needed(double distance, double cap) {
  return static_cast<int>(std::ceil(distance / cap * (1.0 - 1e-12)));
}

DemoFrame lerp_frame(const DemoFrame& a, const DemoFrame& b, double u) {
  DemoFrame f;
  f.hand_keypoints = (1.0 - u) * a.hand_keypoints + u * b.hand_keypoints;
  f.wrist_pose = RigidTransform(
      a.wrist_pose.rotation().slerp(u, b.wrist_pose.rotation()),
      (1.0 - u) * a.wrist_pose.translation() + u * b.wrist_pose.translation());
  f.object_pose = RigidTransform(
      a.object_pose.rotation().slerp(u, b.object_pose.rotation()),
      (1.0 - u) * a.object_pose.translation() + u * b.object_pose.translation());
  return f;
}

}  // namespace

DemoTrajectory limit_wrist_speed(const DemoTrajectory& traj,
                                 double max_wrist_step,
                                 std::vector<int>* inserted) {
  validate(traj);
  if (!(max_wrist_step > 0.0)) throw ConfigError("max_wrist_step must be positive");
  DemoTrajectory out = traj;
  out.frames.clear();
  std::vector<int> added(traj.frames.size(), 0);
  std::vector<int> new_index(traj.frames.size(), 0);
  for (std::size_t i = 0; i < traj.frames.size(); ++i) {
    new_index[i] = static_cast<int>(out.frames.size());
    out.frames.push_back(traj.frames[i]);
    if (i + 1 == traj.frames.size()) break;
    const double step = (traj.frames[i + 1].wrist_pose.translation() -
                         traj.frames[i].wrist_pose.translation())
                            .norm();
    const int n = std::max(0, steps_needed(step, max_wrist_step) - 1);
    for (int j = 1; j <= n; ++j) {
      out.frames.push_back(lerp_frame(traj.frames[i], traj.frames[i + 1],
                                      static_cast<double>(j) / (n + 1)));
    }
    added[i] = n;
  }
  if (traj.lift_index) out.lift_index = new_index[*traj.lift_index];
  if (inserted) *inserted = std::move(added);
  return out;
}

std::optional<int> detect_lift_index(const DemoTrajectory& traj, double threshold) {
  if (traj.frames.empty()) return std::nullopt;
  const double z0 = traj.frames.front().object_pose.translation().z();
  for (std::size_t i = 0; i < traj.frames.size(); ++i) {
    if (traj.frames[i].object_pose.translation().z() > z0 + threshold) {
      return static_cast<int>(i);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Synthetic demonstrations

namespace {

constexpr std::array<const char*, 5> kFingerNames = {"thumb", "index", "middle",
                                                     "ring", "pinky"};
constexpr std::array<const char*, 4> kFingerParts = {"knuckle", "mid", "distal",
                                                     "tip"};

double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }

struct ToyLayout {
  int arm_x, arm_y, arm_z, arm_yaw;
  std::array<int, 5> j1;
  std::array<int, 5> j2;
  std::vector<int> rows;  // human row -> robot keypoint index
};

ToyLayout toy_layout(const KinematicChain& chain) {
  auto joint = [&](const std::string& name) {
    for (int j = 0; j < chain.dof(); ++j) {
      if (chain.joints()[j].name == name) return j;
    }
    throw ConfigError("chain '" + chain.name() + "' has no joint '" + name +
                      "' required by the synthetic demo script");
  };
  ToyLayout l{};
  l.arm_x = joint("arm_x");
  l.arm_y = joint("arm_y");
  l.arm_z = joint("arm_z");
  l.arm_yaw = joint("arm_yaw");
  for (int f = 0; f < 5; ++f) {
    l.j1[f] = joint(std::string(kFingerNames[f]) + "_j1");
    l.j2[f] = joint(std::string(kFingerNames[f]) + "_j2");
  }
  for (int r = 0; r < kHandKeypoints; ++r) {
    const std::string id = hand_keypoint_name(r);
    if (!chain.has_keypoint(id)) {
      throw ConfigError("chain '" + chain.name() + "' has no keypoint '" + id + "'");
    }
    l.rows.push_back(chain.keypoint_index(id));
  }
  return l;
}

}  // namespace

std::string hand_keypoint_name(int row) {
  if (row == kWristRow) return "wrist";
  const int f = (row - 1) / 4;
  const int p = (row - 1) % 4;
  return std::string(kFingerNames.at(f)) + "_" + kFingerParts.at(p);
}

SynthResult synth_demo(const KinematicChain& chain, const SynthSpec& spec,
                       std::uint64_t seed) {
  if (spec.reach_frames < 1) throw ConfigError("reach_frames: must be positive");
  if (spec.close_frames < 1) throw ConfigError("close_frames: must be positive");
  if (spec.lift_frames < 1) throw ConfigError("lift_frames: must be positive");
  if (spec.follow_frames < 0) throw ConfigError("follow_frames: must be non-negative");
  if (!(spec.dt > 0.0)) throw ConfigError("dt: must be positive");
  if (!(spec.alpha > 0.0)) throw ConfigError("alpha: must be positive");
  if (!(spec.lift_height >= 0.05)) throw ConfigError("lift_height: must be at least 0.05 m");
  if (!(spec.follow_distance >= 0.0 && spec.follow_distance <= 0.5)) {
    throw ConfigError("follow_distance: must lie in [0, 0.5] m");
  }
  if (spec.object_xy.norm() > spec.reach_radius) {
    throw ConfigError("object_xy: object at distance " +
                      std::to_string(spec.object_xy.norm()) +
                      " m is outside the reach radius " +
                      std::to_string(spec.reach_radius) + " m");
  }
  const ToyLayout layout = toy_layout(chain);
  const int wrist_kp = layout.rows[kWristRow];

  Rng rng = make_rng(seed, "synth");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double approach_dir = 2.0 * std::numbers::pi * unit(rng);
  const double hand_yaw = spec.hand_yaw + spec.hand_yaw_jitter * (2.0 * unit(rng) - 1.0);
  const double follow_dir = 2.0 * std::numbers::pi * unit(rng);
  const double follow_dyaw = spec.follow_yaw * (2.0 * unit(rng) - 1.0);

  const RigidTransform object0(
      Quat(Eigen::AngleAxisd(spec.object_yaw, Vec3::UnitZ())),
      Vec3(spec.object_xy.x(), spec.object_xy.y(), spec.shape.rest_height()));

  const Vec3 grasp_palm = object0.translation() + Vec3(0, 0, spec.palm_clearance);
  const Vec3 start_palm =
      grasp_palm + Vec3(spec.approach_offset * std::cos(approach_dir),
                        spec.approach_offset * std::sin(approach_dir),
                        spec.approach_height);

  JointConfig q_open = JointConfig::Zero(chain.dof());
  for (int f = 0; f < 5; ++f) {
    q_open[layout.j1[f]] = spec.open_angle;
    q_open[layout.j2[f]] = spec.open_angle * spec.flex_ratio;
  }
  auto with_palm = [&](JointConfig q, const Vec3& palm, double yaw) {
    q[layout.arm_x] = palm.x();
    q[layout.arm_y] = palm.y();
    q[layout.arm_z] = palm.z();
    q[layout.arm_yaw] = yaw;
    return q;
  };

  // Close each finger until its tip sits pad_offset outside the surface.
  JointConfig q_grasp = with_palm(q_open, grasp_palm, hand_yaw);
  {
    const RigidTransform to_object = object0.inverse();
    const Vec3 wrist_check = forward_kinematics(chain, q_grasp)[wrist_kp];
    if ((wrist_check - grasp_palm).norm() > 1e-9) {
      throw ConfigError("chain '" + chain.name() +
                        "' arm layout does not place the wrist at (arm_x, arm_y, arm_z)");
    }
    for (int f = 0; f < 5; ++f) {
      const int tip = layout.rows[kFingertipRows[f]];
      auto gap = [&](double theta) {
        JointConfig q = q_grasp;
        q[layout.j1[f]] = theta;
        q[layout.j2[f]] = theta * spec.flex_ratio;
        return spec.shape.signed_distance(
                   to_object.apply(forward_kinematics(chain, q)[tip])) -
               spec.pad_offset;
      };
      const double upper = chain.joints()[layout.j1[f]].upper;
      double lo = spec.open_angle;
      if (gap(lo) <= 0.0) {
        throw ConfigError("palm_clearance: open finger '" +
                          std::string(kFingerNames[f]) + "' already touches the object");
      }
      double hi = lo;
      while (hi < upper && gap(hi) > 0.0) hi = std::min(upper, hi + 0.01);
      if (gap(hi) > 0.0) {
        throw ConfigError("shape: finger '" + std::string(kFingerNames[f]) +
                          "' cannot reach the object surface");
      }
      lo = std::max(spec.open_angle, hi - 0.01);
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) > 0.0 ? lo : hi) = mid;
      }
      q_grasp[layout.j1[f]] = hi;
      q_grasp[layout.j2[f]] = hi * spec.flex_ratio;
    }
  }

  const double finger_travel = (q_grasp - with_palm(q_open, grasp_palm, hand_yaw)).norm();
  const int close_frames = std::max(
      spec.close_frames,
      static_cast<int>(std::ceil(finger_travel / spec.joint_step_cap)));

  const RigidTransform palm_grasp_pose = keypoint_pose(chain, q_grasp, wrist_kp);
  const RigidTransform object_in_palm = palm_grasp_pose.inverse() * object0;

  std::vector<JointConfig> configs;
  configs.push_back(with_palm(q_open, start_palm, hand_yaw));
  for (int k = 1; k <= spec.reach_frames; ++k) {
    const double s = smoothstep(static_cast<double>(k) / spec.reach_frames);
    configs.push_back(with_palm(q_open, start_palm + s * (grasp_palm - start_palm), hand_yaw));
  }
  const JointConfig q_open_at_grasp = configs.back();
  for (int k = 1; k <= close_frames; ++k) {
    const double u = static_cast<double>(k) / close_frames;
    configs.push_back(q_open_at_grasp + u * (q_grasp - q_open_at_grasp));
  }
  const std::size_t first_carried = configs.size();
  for (int k = 1; k <= spec.lift_frames; ++k) {
    const double s = smoothstep(static_cast<double>(k) / spec.lift_frames);
    configs.push_back(with_palm(q_grasp, grasp_palm + Vec3(0, 0, s * spec.lift_height),
                                hand_yaw));
  }
  const Vec3 lifted_palm = grasp_palm + Vec3(0, 0, spec.lift_height);
  const Vec3 follow_vec = spec.follow_distance *
                          Vec3(std::cos(follow_dir), std::sin(follow_dir), 0.0);
  for (int k = 1; k <= spec.follow_frames; ++k) {
    const double s = smoothstep(static_cast<double>(k) / spec.follow_frames);
    configs.push_back(
        with_palm(q_grasp, lifted_palm + s * follow_vec, hand_yaw + s * follow_dyaw));
  }

  // Object pose and the human wrist for a robot configuration. Once carried,
  // the object rides rigidly in the palm; at the grasp pose both agree.
  auto object_at = [&](const JointConfig& q, bool carried) {
    return carried ? keypoint_pose(chain, q, wrist_kp) * object_in_palm : object0;
  };
  auto human_wrist = [&](const JointConfig& q, bool carried) {
    const Vec3 o = object_at(q, carried).translation();
    const Vec3 p = keypoint_pose(chain, q, wrist_kp).translation();
    return Vec3(o + (p - o) / spec.alpha);
  };

  // Velocity feasibility: subdivide in joint space until consecutive human
  // wrist positions are at most max_wrist_step apart.
  std::vector<JointConfig> dense;
  std::vector<bool> carried;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const bool c = i >= first_carried;
    if (i > 0) {
      const double step =
          (human_wrist(configs[i], c) - human_wrist(configs[i - 1], c)).norm();
      const int n = std::max(0, steps_needed(step, spec.max_wrist_step) - 1);
      for (int j = 1; j <= n; ++j) {
        const double u = static_cast<double>(j) / (n + 1);
        dense.push_back((1.0 - u) * configs[i - 1] + u * configs[i]);
        carried.push_back(c);
      }
    }
    dense.push_back(configs[i]);
    carried.push_back(c);
  }

  DemoTrajectory demo;
  demo.dt = spec.dt;
  demo.object_ref = spec.object_id;
  for (std::size_t t = 0; t < dense.size(); ++t) {
    const RigidTransform palm = keypoint_pose(chain, dense[t], wrist_kp);
    const RigidTransform object = object_at(dense[t], carried[t]);
    const Vec3 o = object.translation();
    const KeypointPositions kp = forward_kinematics(chain, dense[t]);
    DemoFrame frame;
    frame.hand_keypoints.resize(kHandKeypoints, 3);
    for (int r = 0; r < kHandKeypoints; ++r) {
      frame.hand_keypoints.row(r) = (o + (kp[layout.rows[r]] - o) / spec.alpha).transpose();
    }
    frame.wrist_pose = RigidTransform(
        palm.rotation(), o + (palm.translation() - o) / spec.alpha);
    frame.object_pose = object;
    demo.frames.push_back(std::move(frame));
  }
  demo.lift_index = detect_lift_index(demo, spec.lift_threshold);
  if (!demo.lift_index) {
    throw ConfigError("lift_height: object never rises past the lift threshold");
  }
  validate(demo);

  SynthResult result;
  result.demo = std::move(demo);
  result.object = spec.shape.sample(spec.object_id, spec.object_points);
  result.robot_configs = std::move(dense);
  return result;
}

}  // namespace handxfer
