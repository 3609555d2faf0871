#include "handxfer/retarget.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>

#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"

namespace handxfer {

using json_io::Json;
using json_io::ObjectReader;

std::vector<Correspondence> default_correspondence(const KinematicChain& chain) {
  std::vector<Correspondence> out;
  for (int row = 0; row < kHandKeypoints; ++row) {
    const std::string id = hand_keypoint_name(row);
    if (!chain.has_keypoint(id)) continue;
    const bool tip = std::find(kFingertipRows.begin(), kFingertipRows.end(), row) !=
                     kFingertipRows.end();
    out.push_back({row, id, tip ? 1.0 : 0.5});
  }
  return out;
}

RetargetConfig default_retarget_config(const KinematicChain& chain) {
  RetargetConfig cfg;
  cfg.correspondence = default_correspondence(chain);
  return cfg;
}

void validate(const RetargetConfig& cfg, const KinematicChain& chain) {
  if (!(cfg.alpha > 0.0)) throw ConfigError("alpha: must be positive");
  if (!(cfg.step_limit > 0.0)) throw ConfigError("step_limit: must be positive");
  if (cfg.correspondence.empty()) throw ConfigError("correspondence: must not be empty");
  for (std::size_t i = 0; i < cfg.correspondence.size(); ++i) {
    const auto& c = cfg.correspondence[i];
    const std::string path = "correspondence[" + std::to_string(i) + "]";
    if (!(c.weight > 0.0)) throw ConfigError(path + ".weight: must be positive");
    if (c.human_row < 0) throw ConfigError(path + ".human_row: must be non-negative");
    if (!chain.has_keypoint(c.robot_keypoint)) {
      throw ConfigError(path + ".robot_keypoint: chain has no keypoint '" +
                        c.robot_keypoint + "'");
    }
  }
  if (cfg.solver.max_iters < 1) throw ConfigError("solver.max_iters: must be positive");
  if (cfg.solver.initial_iters < 1) {
    throw ConfigError("solver.initial_iters: must be positive");
  }
  if (!(cfg.solver.residual_tol >= 0.0)) {
    throw ConfigError("solver.residual_tol: must be non-negative");
  }
  if (!(cfg.solver.damping_init > 0.0)) {
    throw ConfigError("solver.damping_init: must be positive");
  }
  if (!(cfg.pair_weight >= 0.0)) throw ConfigError("pair_weight: must be non-negative");
  if (!(cfg.rotation_weight >= 0.0)) {
    throw ConfigError("rotation_weight: must be non-negative");
  }
}

Json to_json(const RetargetConfig& cfg) {
  Json corr = Json::array();
  for (const auto& c : cfg.correspondence) {
    corr.push_back({{"human_row", c.human_row},
                    {"robot_keypoint", c.robot_keypoint},
                    {"weight", c.weight}});
  }
  return {{"alpha", cfg.alpha},
          {"step_limit", cfg.step_limit},
          {"correspondence", corr},
          {"solver",
           {{"max_iters", cfg.solver.max_iters},
            {"residual_tol", cfg.solver.residual_tol},
            {"damping_init", cfg.solver.damping_init},
            {"initial_iters", cfg.solver.initial_iters}}},
          {"pair_weight", cfg.pair_weight},
          {"rotation_weight", cfg.rotation_weight}};
}

RetargetConfig retarget_config_from_json(const Json& j, const KinematicChain& chain,
                                         const std::string& path) {
  RetargetConfig cfg = default_retarget_config(chain);
  ObjectReader r(j, path);
  if (r.has("alpha")) cfg.alpha = r.number("alpha");
  if (r.has("step_limit")) cfg.step_limit = r.number("step_limit");
  if (r.has("pair_weight")) cfg.pair_weight = r.number("pair_weight");
  if (r.has("rotation_weight")) cfg.rotation_weight = r.number("rotation_weight");
  if (const Json* corr = r.optional("correspondence")) {
    const std::string cpath = r.child_path("correspondence");
    if (!corr->is_array()) throw SchemaError(cpath, "expected an array");
    cfg.correspondence.clear();
    for (std::size_t i = 0; i < corr->size(); ++i) {
      ObjectReader c((*corr)[i], cpath + "[" + std::to_string(i) + "]");
      Correspondence entry;
      entry.human_row = static_cast<int>(c.integer("human_row"));
      entry.robot_keypoint = c.string("robot_keypoint");
      if (c.has("weight")) entry.weight = c.number("weight");
      c.finish();
      cfg.correspondence.push_back(entry);
    }
  }
  if (const Json* solver = r.optional("solver")) {
    ObjectReader s(*solver, r.child_path("solver"));
    if (s.has("max_iters")) cfg.solver.max_iters = static_cast<int>(s.integer("max_iters"));
    if (s.has("residual_tol")) cfg.solver.residual_tol = s.number("residual_tol");
    if (s.has("damping_init")) cfg.solver.damping_init = s.number("damping_init");
    if (s.has("initial_iters")) {
      cfg.solver.initial_iters = static_cast<int>(s.integer("initial_iters"));
    }
    s.finish();
  }
  r.finish();
  validate(cfg, chain);
  return cfg;
}

namespace {

// Weighted least-squares problem in q: objective = ||r(q)||^2.
struct Problem {
  std::function<Eigen::VectorXd(const JointConfig&)> residual;
  std::function<void(const JointConfig&, Eigen::VectorXd&, Eigen::MatrixXd&)> linearize;
};

// Feasible set: joints outside `free` stay at their start value; the free
// part stays within `radius` of `center` (when bounded) and within limits.
struct Feasible {
  std::vector<bool> free;
  Eigen::VectorXd lower, upper;
  bool bounded = false;
  JointConfig center;
  double radius = 0.0;

  JointConfig project(const JointConfig& x, const JointConfig& start) const {
    JointConfig y = x;
    for (int i = 0; i < y.size(); ++i) {
      if (!free[i]) y[i] = start[i];
    }
    if (bounded) {
      const Eigen::VectorXd delta = y - center;
      const double n = delta.norm();
      if (n > radius) y = center + delta * (radius / n);
    }
    return y.cwiseMax(lower).cwiseMin(upper);
  }
};

// Minimizer of the damped quadratic model g.s + s.(H + mu I)s / 2 over the
// step ball. When the free step leaves the ball, the multiplier lam of the
// ball constraint solves (H + (mu + lam) I) s = -g - lam (x - center) with
// ||x + s - center|| = radius, found by bisection.
Eigen::VectorXd damped_step(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                            double mu, const JointConfig& x, const Feasible& feasible) {
  auto solve = [&](double lam) {
    Eigen::MatrixXd damped = h;
    damped.diagonal().array() += mu + lam;
    Eigen::VectorXd rhs = -g;
    if (lam > 0.0) rhs -= lam * (x - feasible.center);
    return Eigen::VectorXd(damped.ldlt().solve(rhs));
  };
  Eigen::VectorXd step = solve(0.0);
  if (!feasible.bounded) return step;
  auto outside = [&](const Eigen::VectorXd& s) {
    return (x + s - feasible.center).norm() > feasible.radius;
  };
  if (!outside(step)) return step;
  double lo = 0.0, hi = std::max(1.0, mu);
  while (outside(solve(hi)) && hi < 1e15) hi *= 4.0;
  for (int i = 0; i < 80 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (outside(solve(mid)) ? lo : hi) = mid;
  }
  return solve(hi);
}

FrameSolution minimize(const Problem& problem, const Feasible& feasible,
                       const JointConfig& start, const SolverOptions& opt,
                       int max_iters) {
  FrameSolution sol;
  sol.q = feasible.project(start, start);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  double f = problem.residual(sol.q).squaredNorm();
  double mu = opt.damping_init;
  const int n = static_cast<int>(start.size());
  sol.converged = false;
  int it = 0;
  for (; it < max_iters; ++it) {
    if (f <= opt.residual_tol) {
      sol.converged = true;
      break;
    }
    problem.linearize(sol.q, r, jac);
    Eigen::MatrixXd h = jac.transpose() * jac;
    Eigen::VectorXd g = jac.transpose() * r;
    for (int i = 0; i < n; ++i) {
      if (feasible.free[i]) continue;
      h.row(i).setZero();
      h.col(i).setZero();
      h(i, i) = 1.0;
      g[i] = 0.0;
    }
    bool accepted = false;
    while (mu < 1e12) {
      const Eigen::VectorXd step = damped_step(h, g, mu, sol.q, feasible);
      const JointConfig candidate = feasible.project(sol.q + step, start);
      const double f_new = problem.residual(candidate).squaredNorm();
      if (f_new < f) {
        const double moved = (candidate - sol.q).norm();
        sol.q = candidate;
        const double decrease = f - f_new;
        f = f_new;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (moved < 1e-15 || decrease <= 1e-16 * f) {
          sol.converged = true;
          ++it;
        }
        break;
      }
      mu *= 4.0;
    }
    if (!accepted) {
      // No damping level improves the objective: a stationary point of the
      // projected problem.
      sol.converged = true;
      break;
    }
    if (sol.converged) break;
  }
  if (!sol.converged && f <= opt.residual_tol) sol.converged = true;
  sol.iterations = it;
  sol.residual = f;
  return sol;
}

struct KeypointTarget {
  int keypoint;
  Vec3 target;
  double sqrt_weight;
};

std::vector<KeypointTarget> position_targets(const KinematicChain& chain,
                                             const RetargetConfig& cfg,
                                             const HandKeypoints& hand,
                                             const Vec3& object) {
  std::vector<KeypointTarget> out;
  out.reserve(cfg.correspondence.size());
  for (const auto& c : cfg.correspondence) {
    if (c.human_row >= hand.rows()) {
      throw DimensionError("correspondence row " + std::to_string(c.human_row) +
                           " exceeds the " + std::to_string(hand.rows()) +
                           " demo keypoints");
    }
    const Vec3 h = hand.row(c.human_row).transpose();
    out.push_back({chain.keypoint_index(c.robot_keypoint),
                   Vec3(object + cfg.alpha * (h - object)), std::sqrt(c.weight)});
  }
  return out;
}

Problem position_problem(const KinematicChain& chain,
                         std::vector<KeypointTarget> targets) {
  std::vector<int> ids;
  for (const auto& t : targets) ids.push_back(t.keypoint);
  auto shared = std::make_shared<std::vector<KeypointTarget>>(std::move(targets));
  Problem p;
  p.residual = [&chain, shared](const JointConfig& q) {
    const KeypointPositions fk = forward_kinematics(chain, q);
    Eigen::VectorXd r(3 * shared->size());
    for (std::size_t k = 0; k < shared->size(); ++k) {
      const auto& t = (*shared)[k];
      r.segment<3>(3 * k) = t.sqrt_weight * (fk[t.keypoint] - t.target);
    }
    return r;
  };
  p.linearize = [&chain, shared, ids](const JointConfig& q, Eigen::VectorXd& r,
                                      Eigen::MatrixXd& jac) {
    const KeypointJacobians kj = keypoint_jacobians(chain, q, ids);
    r.resize(3 * shared->size());
    jac.resize(3 * shared->size(), chain.dof());
    for (std::size_t k = 0; k < shared->size(); ++k) {
      const auto& t = (*shared)[k];
      r.segment<3>(3 * k) = t.sqrt_weight * (kj.positions[k] - t.target);
      jac.middleRows<3>(3 * k) = t.sqrt_weight * kj.jacobians[k];
    }
  };
  return p;
}

Feasible full_feasible(const KinematicChain& chain) {
  Feasible f;
  f.free.assign(chain.dof(), true);
  f.lower = chain.lower_limits();
  f.upper = chain.upper_limits();
  return f;
}

void check_config(const KinematicChain& chain, const JointConfig& q,
                  const std::string& what) {
  if (q.size() != chain.dof()) {
    throw DimensionError(what + " has " + std::to_string(q.size()) +
                         " values, chain has " + std::to_string(chain.dof()) +
                         " joints");
  }
  if (!q.allFinite()) throw SemanticError(what + " is not finite");
}

}  // namespace

double retarget_objective(const KinematicChain& chain, const RetargetConfig& cfg,
                          const HandKeypoints& hand, const Vec3& object,
                          const JointConfig& q) {
  return position_problem(chain, position_targets(chain, cfg, hand, object))
      .residual(q)
      .squaredNorm();
}

FrameSolution retarget_frame(const KinematicChain& chain, const RetargetConfig& cfg,
                             const HandKeypoints& hand, const Vec3& object,
                             const JointConfig& q_prev) {
  check_config(chain, q_prev, "q_prev");
  Feasible feasible = full_feasible(chain);
  feasible.bounded = true;
  feasible.center = q_prev;
  feasible.radius = cfg.step_limit;
  return minimize(position_problem(chain, position_targets(chain, cfg, hand, object)),
                  feasible, q_prev, cfg.solver, cfg.solver.max_iters);
}

FrameSolution retarget_frame_unbounded(const KinematicChain& chain,
                                       const RetargetConfig& cfg,
                                       const HandKeypoints& hand, const Vec3& object,
                                       const JointConfig& start, int max_iters) {
  check_config(chain, start, "start configuration");
  return minimize(position_problem(chain, position_targets(chain, cfg, hand, object)),
                  full_feasible(chain), start, cfg.solver, max_iters);
}

RetargetMethod parse_retarget_method(const std::string& name) {
  if (name == "position") return RetargetMethod::kPosition;
  if (name == "vector") return RetargetMethod::kVector;
  if (name == "dexpilot") return RetargetMethod::kDexPilot;
  throw ConfigError("unknown retargeting method '" + name +
                    "' (valid: position, vector, dexpilot)");
}

std::string retarget_method_name(RetargetMethod method) {
  switch (method) {
    case RetargetMethod::kPosition: return "position";
    case RetargetMethod::kVector: return "vector";
    case RetargetMethod::kDexPilot: return "dexpilot";
  }
  return "position";
}

namespace {

void push_frame(JointTrajectory& jt, const FrameSolution& sol) {
  if (jt.configs.empty()) {
    jt.primitive_actions.push_back(JointConfig::Zero(sol.q.size()));
  } else {
    jt.primitive_actions.push_back(sol.q - jt.configs.back());
  }
  jt.configs.push_back(sol.q);
  jt.residuals.push_back(sol.residual);
  jt.converged.push_back(sol.converged);
}

void check_inputs(const KinematicChain& chain, const RetargetConfig& cfg,
                  const DemoTrajectory& traj, const JointConfig& q_init) {
  validate(cfg, chain);
  validate(traj);
  check_config(chain, q_init, "q_init");
  if (((q_init - chain.clamp_to_limits(q_init)).array() != 0.0).any()) {
    throw SemanticError("q_init lies outside the joint limits");
  }
}

}  // namespace

JointTrajectory retarget_trajectory(const KinematicChain& chain,
                                    const RetargetConfig& cfg,
                                    const DemoTrajectory& traj,
                                    const JointConfig& q_init) {
  check_inputs(chain, cfg, traj, q_init);
  JointTrajectory jt;
  jt.chain = chain.name();
  jt.method = RetargetMethod::kPosition;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const auto& frame = traj.frames[t];
    const Vec3 o = frame.object_pose.translation();
    push_frame(jt, t == 0 ? retarget_frame_unbounded(chain, cfg, frame.hand_keypoints,
                                                     o, q_init, cfg.solver.initial_iters)
                          : retarget_frame(chain, cfg, frame.hand_keypoints, o,
                                           jt.configs.back()));
  }
  return jt;
}

namespace {

// Wrist-relative fingertip vectors, optionally with all fingertip pairs.
Problem vector_problem(const KinematicChain& chain, const RetargetConfig& cfg,
                       const HandKeypoints& hand, bool pairs) {
  if (chain.fingertip_indices().size() != 5 || !chain.wrist_index()) {
    throw ConfigError("chain '" + chain.name() +
                      "' needs five fingertips and a wrist for vector retargeting");
  }
  if (hand.rows() < kHandKeypoints) {
    throw DimensionError("demo frames need the full hand keypoint layout");
  }
  struct Term {
    int a, b;  // robot keypoints: residual on f_a - f_b
    Vec3 target;
    double sqrt_weight;
  };
  std::vector<Term> terms;
  const auto& tips = chain.fingertip_indices();
  const int wrist = *chain.wrist_index();
  auto human = [&](int row) { return Vec3(hand.row(row).transpose()); };
  for (int m = 0; m < 5; ++m) {
    terms.push_back({tips[m], wrist,
                     cfg.alpha * (human(kFingertipRows[m]) - human(kWristRow)), 1.0});
  }
  if (pairs && cfg.pair_weight > 0.0) {
    for (int i = 0; i < 5; ++i) {
      for (int j = i + 1; j < 5; ++j) {
        terms.push_back({tips[i], tips[j],
                         cfg.alpha * (human(kFingertipRows[i]) - human(kFingertipRows[j])),
                         std::sqrt(cfg.pair_weight)});
      }
    }
  }
  std::vector<int> ids(tips.begin(), tips.end());
  ids.push_back(wrist);
  auto shared = std::make_shared<std::vector<Term>>(std::move(terms));
  auto slot = [ids](int keypoint) {
    return static_cast<int>(std::find(ids.begin(), ids.end(), keypoint) - ids.begin());
  };
  Problem p;
  p.residual = [&chain, shared](const JointConfig& q) {
    const KeypointPositions fk = forward_kinematics(chain, q);
    Eigen::VectorXd r(3 * shared->size());
    for (std::size_t k = 0; k < shared->size(); ++k) {
      const auto& t = (*shared)[k];
      r.segment<3>(3 * k) = t.sqrt_weight * (fk[t.a] - fk[t.b] - t.target);
    }
    return r;
  };
  p.linearize = [&chain, shared, ids, slot](const JointConfig& q, Eigen::VectorXd& r,
                                            Eigen::MatrixXd& jac) {
    const KeypointJacobians kj = keypoint_jacobians(chain, q, ids);
    r.resize(3 * shared->size());
    jac.resize(3 * shared->size(), chain.dof());
    for (std::size_t k = 0; k < shared->size(); ++k) {
      const auto& t = (*shared)[k];
      const int a = slot(t.a), b = slot(t.b);
      r.segment<3>(3 * k) =
          t.sqrt_weight * (kj.positions[a] - kj.positions[b] - t.target);
      jac.middleRows<3>(3 * k) = t.sqrt_weight * (kj.jacobians[a] - kj.jacobians[b]);
    }
  };
  return p;
}

// Wrist pose tracking: position error and rotation error (scaled by
// rotation_weight) of the wrist keypoint frame.
Problem wrist_problem(const KinematicChain& chain, int wrist, const RigidTransform& target,
                      double rotation_weight) {
  Problem p;
  auto residual = [&chain, wrist, target, rotation_weight](const JointConfig& q) {
    const RigidTransform pose = keypoint_pose(chain, q, wrist);
    Eigen::VectorXd r(6);
    r.head<3>() = pose.translation() - target.translation();
    r.tail<3>() = rotation_weight *
                  rotation_log(pose.rotation() * target.rotation().conjugate());
    return r;
  };
  p.residual = residual;
  p.linearize = [&chain, wrist, residual, rotation_weight](
                    const JointConfig& q, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
    r = residual(q);
    jac = keypoint_frame_jacobian(chain, q, wrist);
    jac.bottomRows<3>() *= rotation_weight;
  };
  return p;
}

JointTrajectory baseline_retarget(const KinematicChain& chain, const RetargetConfig& cfg,
                                  const DemoTrajectory& traj, const JointConfig& q_init,
                                  bool pairs) {
  check_inputs(chain, cfg, traj, q_init);
  if (!chain.wrist_index()) {
    throw ConfigError("chain '" + chain.name() + "' does not name a wrist keypoint");
  }
  const int wrist = *chain.wrist_index();
  const std::vector<bool> arm = chain.group_mask(JointGroup::kArm);
  const std::vector<bool> hand = chain.group_mask(JointGroup::kHand);

  JointTrajectory jt;
  jt.chain = chain.name();
  jt.method = pairs ? RetargetMethod::kDexPilot : RetargetMethod::kVector;

  // Anchor: the first frame places the arm by keypoint position matching.
  const auto& first = traj.frames.front();
  const JointConfig anchor =
      retarget_frame_unbounded(chain, cfg, first.hand_keypoints,
                               first.object_pose.translation(), q_init,
                               cfg.solver.initial_iters)
          .q;
  const RigidTransform robot_wrist0 = keypoint_pose(chain, anchor, wrist);
  const RigidTransform& human_wrist0 = first.wrist_pose;

  for (std::size_t t = 0; t < traj.size(); ++t) {
    const auto& frame = traj.frames[t];
    const bool initial = t == 0;
    const JointConfig prev = initial ? anchor : jt.configs.back();
    const int iters = initial ? cfg.solver.initial_iters : cfg.solver.max_iters;

    const Vec3 target_pos =
        robot_wrist0.translation() +
        cfg.alpha * (frame.wrist_pose.translation() - human_wrist0.translation());
    const Quat target_rot = frame.wrist_pose.rotation() *
                            human_wrist0.rotation().conjugate() *
                            robot_wrist0.rotation();
    Feasible arm_set = full_feasible(chain);
    arm_set.free = arm;
    arm_set.bounded = !initial;
    arm_set.center = prev;
    arm_set.radius = cfg.step_limit;
    const FrameSolution arm_sol =
        minimize(wrist_problem(chain, wrist, RigidTransform(target_rot, target_pos),
                               cfg.rotation_weight),
                 arm_set, prev, cfg.solver, iters);

    Feasible hand_set = full_feasible(chain);
    hand_set.free = hand;
    hand_set.bounded = !initial;
    hand_set.center = arm_sol.q;
    for (int i = 0; i < chain.dof(); ++i) {
      if (hand[i]) hand_set.center[i] = prev[i];
    }
    const double used = (arm_sol.q - prev).squaredNorm();
    hand_set.radius = std::sqrt(std::max(0.0, cfg.step_limit * cfg.step_limit - used));
    FrameSolution sol = minimize(vector_problem(chain, cfg, frame.hand_keypoints, pairs),
                                 hand_set, hand_set.center, cfg.solver, iters);
    sol.converged = sol.converged && arm_sol.converged;
    push_frame(jt, sol);
  }
  return jt;
}

}  // namespace

JointTrajectory vector_retarget(const KinematicChain& chain, const RetargetConfig& cfg,
                                const DemoTrajectory& traj, const JointConfig& q_init) {
  return baseline_retarget(chain, cfg, traj, q_init, false);
}

JointTrajectory dexpilot_retarget(const KinematicChain& chain,
                                  const RetargetConfig& cfg,
                                  const DemoTrajectory& traj,
                                  const JointConfig& q_init) {
  return baseline_retarget(chain, cfg, traj, q_init, true);
}

JointTrajectory run_retargeter(RetargetMethod method, const KinematicChain& chain,
                               const RetargetConfig& cfg, const DemoTrajectory& traj,
                               const JointConfig& q_init) {
  switch (method) {
    case RetargetMethod::kVector: return vector_retarget(chain, cfg, traj, q_init);
    case RetargetMethod::kDexPilot: return dexpilot_retarget(chain, cfg, traj, q_init);
    case RetargetMethod::kPosition: break;
  }
  return retarget_trajectory(chain, cfg, traj, q_init);
}

std::string serialize_joint_trajectory(const JointTrajectory& jt,
                                       const RetargetConfig& cfg) {
  Json frames = Json::array();
  for (std::size_t t = 0; t < jt.size(); ++t) {
    const auto& q = jt.configs[t];
    const auto& a = jt.primitive_actions[t];
    frames.push_back({{"q", std::vector<double>(q.data(), q.data() + q.size())},
                      {"action", std::vector<double>(a.data(), a.data() + a.size())},
                      {"residual", jt.residuals[t]},
                      {"converged", static_cast<bool>(jt.converged[t])}});
  }
  Json doc{{"chain", jt.chain},
           {"method", retarget_method_name(jt.method)},
           {"config", to_json(cfg)},
           {"frames", frames}};
  return doc.dump() + "\n";
}

JointTrajectory parse_joint_trajectory(const std::string& text) {
  const Json doc = json_io::parse(text);
  ObjectReader root(doc, "");
  JointTrajectory jt;
  jt.chain = root.string("chain");
  jt.method = parse_retarget_method(root.string("method"));
  root.required("config");  // echo only
  const Json& frames = root.required("frames");
  if (!frames.is_array() || frames.empty()) {
    throw SchemaError("frames", "expected a non-empty array");
  }
  std::size_t dof = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    ObjectReader fr(frames[i], "frames[" + std::to_string(i) + "]");
    const Json& qj = fr.required("q");
    if (i == 0) dof = qj.is_array() ? qj.size() : 0;
    const auto q = json_io::as_numbers(qj, fr.child_path("q"), dof);
    const auto a = json_io::as_numbers(fr.required("action"), fr.child_path("action"), dof);
    jt.configs.push_back(Eigen::Map<const Eigen::VectorXd>(q.data(), q.size()));
    jt.primitive_actions.push_back(Eigen::Map<const Eigen::VectorXd>(a.data(), a.size()));
    jt.residuals.push_back(fr.number("residual"));
    jt.converged.push_back(fr.boolean("converged"));
    fr.finish();
  }
  root.finish();
  return jt;
}

void save_joint_trajectory(const JointTrajectory& jt, const RetargetConfig& cfg,
                           const std::string& path) {
  json_io::write_file(path, serialize_joint_trajectory(jt, cfg));
}

JointTrajectory load_joint_trajectory(const std::string& path) {
  return parse_joint_trajectory(json_io::read_file(path));
}

}  // namespace handxfer
