#include "handxfer/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"
#include "handxfer/random.hpp"

namespace handxfer {

namespace {

using Json = nlohmann::json;

JointConfig clamp_norm(const JointConfig& a, double bound) {
  const double n = a.norm();
  if (n <= bound) return a;
  return a * (bound / n);
}

}  // namespace

void validate(const EnvConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("env.") + name + ": must be positive");
    }
  };
  positive(c.dt, "dt");
  positive(c.contact_radius, "contact_radius");
  positive(c.lift_threshold, "lift_threshold");
  positive(c.drop_distance, "drop_distance");
  positive(c.step_limit, "step_limit");
  positive(c.alpha, "alpha");
  if (!(c.attach_spread_min >= 0.0) || c.attach_spread_min > M_PI) {
    throw ConfigError("env.attach_spread_min: must lie in [0, pi]");
  }
  if (c.attach_min_contacts < 2 || c.attach_min_contacts > 5) {
    throw ConfigError("env.attach_min_contacts: must lie in [2, 5]");
  }
  if (!(c.detection_noise >= 0.0) || !std::isfinite(c.detection_noise)) {
    throw ConfigError("env.detection_noise: must be non-negative");
  }
  if (!(c.gravity >= 0.0) || !std::isfinite(c.gravity)) {
    throw ConfigError("env.gravity: must be non-negative");
  }
  if (c.horizon < 1) throw ConfigError("env.horizon: must be at least 1");
}

Json to_json(const EnvConfig& c) {
  return {{"dt", c.dt},
          {"contact_radius", c.contact_radius},
          {"attach_min_contacts", c.attach_min_contacts},
          {"attach_spread_min", c.attach_spread_min},
          {"lift_threshold", c.lift_threshold},
          {"drop_distance", c.drop_distance},
          {"detection_noise", c.detection_noise},
          {"horizon", c.horizon},
          {"step_limit", c.step_limit},
          {"alpha", c.alpha},
          {"gravity", c.gravity},
          {"observe_contacts", c.observe_contacts}};
}

EnvConfig env_config_from_json(const Json& j, const std::string& path) {
  EnvConfig c;
  json_io::ObjectReader r(j, path);
  if (r.has("dt")) c.dt = r.number("dt");
  if (r.has("contact_radius")) c.contact_radius = r.number("contact_radius");
  if (r.has("attach_min_contacts")) {
    c.attach_min_contacts = static_cast<int>(r.integer("attach_min_contacts"));
  }
  if (r.has("attach_spread_min")) c.attach_spread_min = r.number("attach_spread_min");
  if (r.has("lift_threshold")) c.lift_threshold = r.number("lift_threshold");
  if (r.has("drop_distance")) c.drop_distance = r.number("drop_distance");
  if (r.has("detection_noise")) c.detection_noise = r.number("detection_noise");
  if (r.has("horizon")) c.horizon = static_cast<int>(r.integer("horizon"));
  if (r.has("step_limit")) c.step_limit = r.number("step_limit");
  if (r.has("alpha")) c.alpha = r.number("alpha");
  if (r.has("gravity")) c.gravity = r.number("gravity");
  if (r.has("observe_contacts")) c.observe_contacts = r.boolean("observe_contacts");
  r.finish();
  validate(c);
  return c;
}

HandKeypoints detection_noise(const EnvConfig& cfg, int keypoints, std::uint64_t seed) {
  Rng rng = make_rng(seed, "detection");
  std::normal_distribution<double> gauss(0.0, 1.0);
  HandKeypoints noise(keypoints, 3);
  for (int k = 0; k < keypoints; ++k) {
    for (int c = 0; c < 3; ++c) noise(k, c) = cfg.detection_noise * gauss(rng);
  }
  return noise;
}

DemoTrajectory apply_detection_noise(const DemoTrajectory& demo, const HandKeypoints& noise) {
  DemoTrajectory out = demo;
  for (auto& f : out.frames) {
    if (f.hand_keypoints.rows() != noise.rows()) {
      throw DimensionError("detection noise has " + std::to_string(noise.rows()) +
                           " rows, demo frames have " +
                           std::to_string(f.hand_keypoints.rows()));
    }
    f.hand_keypoints += noise;
  }
  return out;
}

Eigen::VectorXd object_descriptor(const ObjectModel& model) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(kDescriptorSize);
  d(0) = model.scale;
  d(1) = model.bounding_radius;
  const auto& p = model.points;
  const Eigen::RowVector3d mean = p.colwise().mean();
  const Eigen::MatrixXd centered = p.rowwise() - mean;
  const Mat3 cov = centered.transpose() * centered / static_cast<double>(p.rows());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Vec3 extents;
  for (int a = 0; a < 3; ++a) {
    const Eigen::VectorXd proj = centered * eig.eigenvectors().col(a);
    extents(a) = proj.maxCoeff() - proj.minCoeff();
  }
  std::sort(extents.data(), extents.data() + 3, std::greater<>());
  d.segment<3>(2) = extents;
  if (model.bounding_radius > 0.0) {
    for (int i = 0; i < p.rows(); ++i) {
      const double u = p.row(i).norm() / model.bounding_radius;
      const int bin = std::clamp(static_cast<int>(u * 8.0), 0, 7);
      d(5 + bin) += 1.0;
    }
    d.tail<8>() /= static_cast<double>(p.rows());
  }
  return d;
}

Episode make_episode(const KinematicChain& chain, const EnvConfig& env_cfg,
                     const RetargetConfig& retarget_cfg, RetargetMethod method,
                     std::shared_ptr<const DemoTrajectory> demo,
                     std::shared_ptr<const ObjectModel> object, std::uint64_t seed) {
  Episode ep;
  ep.noise = detection_noise(env_cfg, static_cast<int>(demo->frames.at(0).hand_keypoints.rows()),
                             seed);
  const DemoTrajectory noisy = apply_detection_noise(*demo, ep.noise);
  const JointConfig q_init = chain.clamp_to_limits(JointConfig::Zero(chain.dof()));
  ep.primitives = run_retargeter(method, chain, retarget_cfg, noisy, q_init);
  ep.demo = std::move(demo);
  ep.object = std::move(object);
  ep.seed = seed;
  return ep;
}

ObservationLayout observation_layout(int dof, int horizon) {
  ObservationLayout l;
  l.dof = dof;
  l.horizon = horizon;
  int at = 0;
  l.descriptor = at;
  at += kDescriptorSize;
  l.object = at;
  at += 7;
  l.joints = at;
  at += dof;
  l.fingertips = at;
  at += 15;
  l.contacts = at;
  at += 5;
  l.goal_hand = at;
  at += 15 * horizon;
  l.goal_object = at;
  at += 3 * horizon;
  l.size = at;
  return l;
}

GraspEnv::GraspEnv(const KinematicChain& chain, EnvConfig cfg, RewardParams reward)
    : chain_(&chain), cfg_(cfg), reward_(reward) {
  validate(cfg_);
  validate(reward_);
  if (chain.fingertip_indices().size() != 5) {
    throw SemanticError("chain '" + chain.name() + "' must name five fingertips");
  }
  if (!chain.wrist_index()) {
    throw SemanticError("chain '" + chain.name() + "' must name a wrist keypoint");
  }
  palm_ = *chain.wrist_index();
  for (int m = 0; m < 5; ++m) tips_[m] = chain.fingertip_indices()[m];
  layout_ = observation_layout(chain.dof(), cfg_.horizon);
}

Eigen::VectorXd GraspEnv::reset(const Episode& episode) {
  const auto& demo = *episode.demo;
  if (demo.size() < 2) throw SemanticError("demo must have at least two frames");
  if (episode.primitives.size() != demo.size()) {
    throw DimensionError("joint trajectory has " + std::to_string(episode.primitives.size()) +
                         " frames, demo has " + std::to_string(demo.size()));
  }
  if (episode.primitives.configs[0].size() != chain_->dof()) {
    throw DimensionError("joint trajectory dof does not match the chain");
  }
  episode_copy_ = episode;
  episode_ = &episode_copy_;
  descriptor_ = object_descriptor(*episode.object);
  t0_ = handxfer::switch_time(demo, reward_);

  goal_tips_.assign(demo.size(), Fingertips{});
  for (std::size_t t = 0; t < demo.size(); ++t) {
    const Vec3 o = demo.frames[t].object_pose.translation();
    for (int m = 0; m < 5; ++m) {
      const Vec3 h = (demo.frames[t].hand_keypoints.row(kFingertipRows[m]) +
                      episode.noise.row(kFingertipRows[m]))
                         .transpose();
      goal_tips_[t][m] = o + cfg_.alpha * (h - o);
    }
  }

  state_ = EnvState{};
  state_.q = episode.primitives.configs[0];
  state_.object_pose = demo.frames[0].object_pose;
  state_.support_height = state_.object_pose.translation().z();
  update_contacts();

  trace_ = EpisodeTrace{};
  trace_.object_ref = demo.object_ref;
  trace_.seed = episode.seed;
  record(0.0, StepInfo{});
  return observe();
}

Fingertips GraspEnv::fingertips() const {
  const auto kp = forward_kinematics(*chain_, state_.q);
  Fingertips out;
  for (int m = 0; m < 5; ++m) out[m] = kp[tips_[m]];
  return out;
}

Fingertips GraspEnv::goal_fingertips(int t) const {
  return goal_tips_[std::clamp(t, 0, last_frame())];
}

Vec3 GraspEnv::demo_object(int t) const {
  return episode_->demo->frames[std::clamp(t, 0, last_frame())].object_pose.translation();
}

JointConfig GraspEnv::primitive_action() const {
  return episode_->primitives.primitive_actions[std::min(state_.t + 1, last_frame())];
}

void GraspEnv::update_contacts() {
  const auto& points = episode_->object->points;
  const RigidTransform inv = state_.object_pose.inverse();
  const Fingertips tips = fingertips();
  for (int m = 0; m < 5; ++m) {
    const Vec3 local = inv.apply(tips[m]);
    Eigen::Index nearest = 0;
    const double d2 = (points.rowwise() - local.transpose()).rowwise().squaredNorm().minCoeff(
        &nearest);
    const Vec3 surface = points.row(nearest).transpose();
    // Penetration counts as contact.
    const bool inside = (local - surface).dot(surface) < 0.0;
    state_.contacts[m] = inside || std::sqrt(d2) <= cfg_.contact_radius;
  }
}

void GraspEnv::record(double reward, const StepInfo& info) {
  TraceFrame f;
  f.t = state_.t;
  f.q = state_.q;
  f.object_pose = state_.object_pose;
  f.contacts = state_.contacts;
  f.attached = state_.attached;
  f.reward = reward;
  f.info = info;
  trace_.frames.push_back(std::move(f));
}

StepResult GraspEnv::step(const JointConfig& action) {
  if (episode_ == nullptr) throw Error("step called before reset");
  if (state_.terminated) throw Error("step called on a finished episode");
  if (action.size() != chain_->dof()) {
    throw DimensionError("action has " + std::to_string(action.size()) +
                         " entries, chain has " + std::to_string(chain_->dof()) + " joints");
  }
  if (!action.allFinite()) throw Error("action has non-finite entries");

  StepResult out;
  state_.q = chain_->clamp_to_limits(state_.q + clamp_norm(action, cfg_.step_limit));
  state_.t += 1;

  const RigidTransform palm = keypoint_pose(*chain_, state_.q, palm_);
  if (state_.attached) state_.object_pose = palm * state_.object_in_palm;
  update_contacts();

  const Fingertips tips = fingertips();
  const Vec3 center = state_.object_pose.translation();
  int count = 0;
  double spread = 0.0;
  for (int a = 0; a < 5; ++a) {
    if (!state_.contacts[a]) continue;
    ++count;
    const Vec3 da = (tips[a] - center).normalized();
    for (int b = a + 1; b < 5; ++b) {
      if (!state_.contacts[b]) continue;
      const Vec3 db = (tips[b] - center).normalized();
      spread = std::max(spread, std::acos(std::clamp(da.dot(db), -1.0, 1.0)));
    }
  }

  if (state_.attached && count < cfg_.attach_min_contacts) {
    state_.attached = false;
    state_.detached_after_attach = true;
    state_.fall_speed = 0.0;
    out.info.drop = true;
  } else if (!state_.attached && count >= cfg_.attach_min_contacts &&
             spread > cfg_.attach_spread_min) {
    state_.attached = true;
    state_.object_in_palm = palm.inverse() * state_.object_pose;
    if (!state_.ever_attached) out.info.grasp = true;
    state_.ever_attached = true;
  }

  if (!state_.attached) {
    Vec3 p = state_.object_pose.translation();
    if (p.z() > state_.support_height) {
      const double drop = state_.fall_speed * cfg_.dt + 0.5 * cfg_.gravity * cfg_.dt * cfg_.dt;
      state_.fall_speed += cfg_.gravity * cfg_.dt;
      p.z() = std::max(state_.support_height, p.z() - drop);
      if (p.z() == state_.support_height) state_.fall_speed = 0.0;
      state_.object_pose = RigidTransform(state_.object_pose.rotation(), p);
    }
  }

  const Vec3 object = state_.object_pose.translation();
  if (state_.attached && !state_.lifted &&
      object.z() >= state_.support_height + cfg_.lift_threshold) {
    state_.lifted = true;
    out.info.lift = true;
  }

  const bool departed = (object - demo_object(state_.t)).norm() > cfg_.drop_distance;
  if (departed) out.info.drop = true;
  out.done = departed || state_.t >= last_frame();
  state_.terminated = out.done;
  out.info.followed = out.done && !departed && state_.t >= last_frame() && state_.attached &&
                      state_.lifted && !state_.detached_after_attach;

  RewardInputs in;
  in.t = state_.t;
  in.t0 = t0_;
  in.tips = fingertips();
  in.demo_tips = goal_tips_[state_.t];
  in.object = object;
  in.demo_object = demo_object(state_.t);
  in.terminal = out.done;
  in.followed = out.info.followed;
  out.reward = staged_reward(in, reward_);

  record(out.reward, out.info);
  return out;
}

Eigen::VectorXd GraspEnv::observe() const {
  const auto& l = layout_;
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(l.size);
  obs.segment(l.descriptor, kDescriptorSize) = descriptor_;
  const Vec3 object = state_.object_pose.translation();
  Quat rot = state_.object_pose.rotation();
  if (rot.w() < 0.0) rot.coeffs() *= -1.0;
  obs.segment<3>(l.object) = object;
  obs.segment<4>(l.object + 3) << rot.w(), rot.x(), rot.y(), rot.z();
  obs.segment(l.joints, l.dof) = state_.q;
  const Fingertips tips = fingertips();
  for (int m = 0; m < 5; ++m) obs.segment<3>(l.fingertips + 3 * m) = tips[m] - object;
  if (cfg_.observe_contacts) {
    for (int m = 0; m < 5; ++m) obs(l.contacts + m) = state_.contacts[m] ? 1.0 : 0.0;
  }
  for (int k = 0; k < l.horizon; ++k) {
    const Fingertips goal = goal_fingertips(state_.t + k);
    for (int m = 0; m < 5; ++m) obs.segment<3>(l.goal_hand + 15 * k + 3 * m) = goal[m];
    obs.segment<3>(l.goal_object + 3 * k) = demo_object(state_.t + 1 + k) - object;
  }
  return obs;
}

std::string serialize_trace(const EpisodeTrace& trace) {
  Json frames = Json::array();
  for (const auto& f : trace.frames) {
    Json events = Json::array();
    if (f.info.grasp) events.push_back("grasp");
    if (f.info.lift) events.push_back("lift");
    if (f.info.drop) events.push_back("drop");
    if (f.info.followed) events.push_back("followed");
    frames.push_back({{"t", f.t},
                      {"q", std::vector<double>(f.q.data(), f.q.data() + f.q.size())},
                      {"object_pose", json_io::to_json(f.object_pose)},
                      {"contacts", f.contacts},
                      {"attached", f.attached},
                      {"reward", f.reward},
                      {"events", events}});
  }
  return json_io::dump(
      {{"object_ref", trace.object_ref}, {"seed", trace.seed}, {"frames", frames}});
}

EpisodeTrace parse_trace(const std::string& text) {
  const Json root_json = json_io::parse(text);
  json_io::ObjectReader root(root_json, "");
  EpisodeTrace trace;
  trace.object_ref = root.string("object_ref");
  const Json& seed = root.required("seed");
  if (!seed.is_number_unsigned()) throw SchemaError("seed", "expected an unsigned integer");
  trace.seed = seed.get<std::uint64_t>();
  const Json& frames = root.required("frames");
  if (!frames.is_array()) throw SchemaError("frames", "expected an array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string path = "frames[" + std::to_string(i) + "]";
    json_io::ObjectReader r(frames[i], path);
    TraceFrame f;
    f.t = static_cast<int>(r.integer("t"));
    const Json& q = r.required("q");
    if (!q.is_array()) throw SchemaError(path + ".q", "expected an array");
    const auto values = json_io::as_numbers(q, path + ".q", q.size());
    f.q = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    f.object_pose = json_io::as_pose(r.required("object_pose"), r.child_path("object_pose"));
    const Json& contacts = r.required("contacts");
    if (!contacts.is_array() || contacts.size() != 5) {
      throw SchemaError(path + ".contacts", "expected 5 booleans");
    }
    for (int m = 0; m < 5; ++m) {
      if (!contacts[m].is_boolean()) throw SchemaError(path + ".contacts", "expected 5 booleans");
      f.contacts[m] = contacts[m].get<bool>();
    }
    f.attached = r.boolean("attached");
    f.reward = r.number("reward");
    const Json& events = r.required("events");
    if (!events.is_array()) throw SchemaError(path + ".events", "expected an array");
    for (const auto& e : events) {
      const std::string name = e.is_string() ? e.get<std::string>() : "";
      if (name == "grasp") f.info.grasp = true;
      else if (name == "lift") f.info.lift = true;
      else if (name == "drop") f.info.drop = true;
      else if (name == "followed") f.info.followed = true;
      else throw SchemaError(path + ".events", "unknown event '" + name + "'");
    }
    r.finish();
    trace.frames.push_back(std::move(f));
  }
  root.finish();
  return trace;
}

}  // namespace handxfer
