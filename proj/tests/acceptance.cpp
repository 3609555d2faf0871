// End-to-end acceptance run: prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"
#include "experiment.hpp"
#include "handxfer/json_io.hpp"
#include "handxfer/policy.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;

namespace handxfer {
namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const KinematicChain& toy_hand() {
  static const KinematicChain chain = load_chain(testing::data_path("chains/toy_hand.json"));
  return chain;
}

// ---------------------------------------------------------------------------
// 1. Forward kinematics and Jacobians

Verdict check_kinematics() {
  double fk_err = 0.0;
  double jac_err = 0.0;
  int keypoints = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto chain = testing::random_chain(1000 + i);
    const JointConfig q = testing::random_config(chain, 2000 + i);
    const auto fk = forward_kinematics(chain, q);
    for (int k = 0; k < static_cast<int>(chain.keypoints().size()); ++k) {
      fk_err = std::max(fk_err, (fk[k] - testing::fk_oracle(chain, q, k)).cwiseAbs().maxCoeff());
      const Matrix3X jac = keypoint_jacobian(chain, q, chain.keypoints()[k].id);
      jac_err = std::max(jac_err, (jac - testing::jacobian_fd(chain, q, k)).cwiseAbs().maxCoeff());
      ++keypoints;
    }
  }
  return {fk_err <= 1e-12 && jac_err <= 1e-5,
          std::to_string(keypoints) + " keypoints, FK err " + fmt("%.2e", fk_err) +
              ", Jacobian err " + fmt("%.2e", jac_err)};
}

// ---------------------------------------------------------------------------
// 2. Retargeting optimality and the per-frame step bound

// Planar chain tip with the given link lengths, written out directly.
Vec3 planar_tip(const Eigen::VectorXd& q, const std::vector<double>& lengths) {
  Vec3 p = Vec3::Zero();
  double angle = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    angle += q[j];
    p += lengths[j] * Vec3(std::cos(angle), std::sin(angle), 0.0);
  }
  return p;
}

KinematicChain planar_chain(const std::vector<double>& lengths) {
  using Json = nlohmann::json;
  const Json identity = {1.0, 0.0, 0.0, 0.0};
  Json doc = {{"name", "planar"}, {"links", {{{"name", "base"}}}}, {"joints", Json::array()}};
  std::string parent = "base";
  double offset = 0.0;
  for (std::size_t j = 0; j < lengths.size(); ++j) {
    const std::string child = "l" + std::to_string(j);
    doc["links"].push_back({{"name", child}});
    doc["joints"].push_back({{"name", "j" + std::to_string(j)},
                             {"kind", "revolute"},
                             {"parent", parent},
                             {"child", child},
                             {"origin", {{"xyz", {offset, 0.0, 0.0}}, {"wxyz", identity}}},
                             {"axis", {0.0, 0.0, 1.0}},
                             {"limits", {-3.2, 3.2}}});
    parent = child;
    offset = lengths[j];
  }
  doc["keypoints"] = {{{"id", "tip"}, {"link", parent},
                       {"offset", {{"xyz", {offset, 0.0, 0.0}}, {"wxyz", identity}}}}};
  return parse_chain(doc.dump());
}

Verdict check_retargeting() {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_gap = -1e300;
  int problems = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int dof = 1 + trial % 2;
    std::vector<double> lengths;
    for (int j = 0; j < dof; ++j) lengths.push_back(0.5 + 0.5 * std::abs(u(rng)));
    const auto chain = planar_chain(lengths);
    RetargetConfig cfg;
    cfg.alpha = 1.0;
    cfg.step_limit = 0.05 + 0.3 * std::abs(u(rng));
    cfg.correspondence = {{0, "tip", 1.0}};
    Eigen::VectorXd prev(dof);
    for (int j = 0; j < dof; ++j) prev[j] = 2.5 * u(rng);
    Eigen::VectorXd aim(dof);
    for (int j = 0; j < dof; ++j) aim[j] = prev[j] + 1.5 * u(rng);
    const Vec3 target = planar_tip(aim, lengths) + 0.1 * Vec3(u(rng), u(rng), 0.0);
    HandKeypoints hand(1, 3);
    hand.row(0) = target.transpose();

    const auto sol = retarget_frame(chain, cfg, hand, Vec3::Zero(), prev);
    const double d = cfg.step_limit;
    if ((sol.q - prev).norm() > d + 1e-12) return {false, "step bound violated on a grid problem"};
    const Eigen::VectorXd lo = (prev.array() - d).max(chain.lower_limits().array());
    const Eigen::VectorXd hi = (prev.array() + d).min(chain.upper_limits().array());
    const auto grid = testing::grid_minimum(
        [&](const Eigen::VectorXd& q) { return (planar_tip(q, lengths) - target).squaredNorm(); },
        lo, hi, 1e-3, [&](const Eigen::VectorXd& q) { return (q - prev).norm() <= d; });
    const double solved = (planar_tip(sol.q, lengths) - target).squaredNorm();
    worst_gap = std::max(worst_gap, solved - grid.value);
    ++problems;
  }

  // Step bound over the whole synthetic suite, clean and with detection noise.
  const auto& chain = toy_hand();
  const auto tasks = make_suite(chain, default_suite_config(), 1);
  const RetargetConfig cfg = default_retarget_config(chain);
  const EnvConfig env;
  long frames = 0;
  long violations = 0;
  double largest = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto clean = retarget_trajectory(chain, cfg, *tasks[i].demo,
                                           chain.clamp_to_limits(JointConfig::Zero(chain.dof())));
    const auto noisy = make_episode(chain, env, cfg, RetargetMethod::kPosition, tasks[i].demo,
                                    tasks[i].object, 500 + i);
    for (const JointTrajectory* jt : {&clean, &noisy.primitives}) {
      for (std::size_t t = 1; t < jt->size(); ++t) {
        const double step = (jt->configs[t] - jt->configs[t - 1]).norm();
        largest = std::max(largest, step);
        if (step > cfg.step_limit) ++violations;
        ++frames;
      }
    }
  }
  return {worst_gap <= 1e-4 && violations == 0,
          std::to_string(problems) + " grid problems, worst gap " + fmt("%.2e", worst_gap) + "; " +
              std::to_string(frames) + " frames, " + std::to_string(violations) +
              " over the bound, largest step " + fmt("%.6f", largest)};
}

// ---------------------------------------------------------------------------
// 3. Augmentation invariants

Verdict check_augmentation() {
  const auto demo = synth_demo(toy_hand(), SynthSpec{}, 3).demo;
  const Vec3 start = demo.frames.front().object_pose.translation();
  Workspace ws;
  ws.min = Vec3(0.2, -0.4, start.z());
  ws.max = Vec3(0.8, 0.4, start.z());
  ws.yaw_min = -std::numbers::pi;
  ws.yaw_max = std::numbers::pi;
  const auto augs = sample_augmentations(demo, 1000, ws, 9);

  double rel_err = 0.0;
  long z_changes = 0;
  for (const auto& a : augs) {
    const Mat3 rot = a.transform.to_rigid().rotation_matrix();
    for (std::size_t f = 0; f < demo.size(); ++f) {
      const auto& before = demo.frames[f];
      const auto& after = a.trajectory.frames[f];
      const Vec3 o0 = before.object_pose.translation();
      const Vec3 o1 = after.object_pose.translation();
      if (o1.z() != o0.z()) ++z_changes;
      if (after.wrist_pose.translation().z() != before.wrist_pose.translation().z()) ++z_changes;
      for (int k = 0; k < kHandKeypoints; ++k) {
        const Vec3 h0 = before.hand_keypoints.row(k).transpose();
        const Vec3 h1 = after.hand_keypoints.row(k).transpose();
        rel_err = std::max(rel_err, ((h1 - o1) - rot * (h0 - o0)).cwiseAbs().maxCoeff());
        rel_err = std::max(rel_err, std::abs((h1 - o1).norm() - (h0 - o0).norm()));
        if (h1.z() != h0.z()) ++z_changes;
      }
    }
  }

  // Composition: applying two transforms in turn equals applying their
  // composition once.
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double group_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const WorkspaceTransform t1{std::numbers::pi * u(rng), Vec3(0.3 * u(rng), 0.3 * u(rng), 0.1 * u(rng))};
    const WorkspaceTransform t2{std::numbers::pi * u(rng), Vec3(0.3 * u(rng), 0.3 * u(rng), 0.1 * u(rng))};
    const auto twice = augment(augment(demo, t1), t2);
    const auto once = augment(demo, compose(t2, t1));
    for (std::size_t f = 0; f < demo.size(); ++f) {
      const auto& a = twice.frames[f];
      const auto& b = once.frames[f];
      group_err = std::max(group_err, (a.hand_keypoints - b.hand_keypoints).cwiseAbs().maxCoeff());
      group_err = std::max(group_err, (a.object_pose.translation() - b.object_pose.translation())
                                          .cwiseAbs().maxCoeff());
      group_err = std::max(group_err, (a.object_pose.rotation_matrix() -
                                       b.object_pose.rotation_matrix()).cwiseAbs().maxCoeff());
      group_err = std::max(group_err, (a.wrist_pose.translation() - b.wrist_pose.translation())
                                          .cwiseAbs().maxCoeff());
    }
  }
  return {rel_err <= 1e-12 && z_changes == 0 && group_err <= 1e-12,
          "1000 transforms, relative vector err " + fmt("%.2e", rel_err) + ", " +
              std::to_string(z_changes) + " z changes, composition err " + fmt("%.2e", group_err)};
}

// ---------------------------------------------------------------------------
// 4. Reward closed forms and the stage switch

Verdict check_reward() {
  RewardParams p;
  p.gamma_hand = 1.0;
  Fingertips tips;
  for (int m = 0; m < 5; ++m) tips[m] = Vec3(0.4 + 0.02 * m, 0.01 * m, 0.1);
  const double at_zero = hand_reward(tips, tips, p);
  Fingertips unit = tips;
  unit[1] += Vec3(0.6, 0.0, 0.0);
  unit[3] += Vec3(0.0, 0.0, 0.8);  // 0.36 + 0.64 = 1
  const double at_unit = hand_reward(tips, unit, p);
  bool closed = at_zero == p.beta_hand && std::abs(at_unit - p.beta_hand * std::exp(-1.0)) <= 1e-12;

  // Stage switch inside the environment: rewards before t0 come from the
  // hand term, from t0 on from the object term.
  const RewardParams params;
  int switches_ok = 0;
  int demos = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = synth_demo(toy_hand(), SynthSpec{}, seed);
    auto demo = std::make_shared<const DemoTrajectory>(s.demo);
    auto object = std::make_shared<const ObjectModel>(s.object);
    EnvConfig cfg;
    cfg.detection_noise = 0.0;
    GraspEnv env(toy_hand(), cfg, params);
    env.reset(make_episode(toy_hand(), cfg, default_retarget_config(toy_hand()),
                           RetargetMethod::kPosition, demo, object, seed));
    const int expected = *s.demo.lift_index - 15;
    bool ok = env.switch_time() == expected;
    StepResult r;
    do {
      r = env.step(env.primitive_action());
      const int t = env.state().t;
      const Vec3 o = s.demo.frames[t].object_pose.translation();
      Fingertips demo_tips;
      for (int m = 0; m < 5; ++m) {
        const Vec3 h = s.demo.frames[t].hand_keypoints.row(kFingertipRows[m]).transpose();
        demo_tips[m] = o + cfg.alpha * (h - o);
      }
      const double hand = hand_reward(env.fingertips(), demo_tips, params);
      const double obj = object_reward(env.fingertips(), env.state().object_pose.translation(), o,
                                       params);
      const double want = t < expected ? hand : obj;
      if (std::abs(r.reward - want) > 1e-12) ok = false;
    } while (!r.done);
    switches_ok += ok;
    ++demos;
  }
  return {closed && switches_ok == demos,
          "r(0) = " + fmt("%.12g", at_zero) + ", r(1) = " + fmt("%.12g", at_unit) + ", switch at lift-15 on " +
              std::to_string(switches_ok) + "/" + std::to_string(demos) + " demos"};
}

// ---------------------------------------------------------------------------
// 5. PPO gradients against finite differences

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

Verdict check_gradients() {
  const auto& chain = toy_hand();
  PolicyConfig cfg;
  cfg.hidden = {8, 8};
  cfg.num_envs = 2;
  cfg.rollout_length = 64;
  cfg.minibatch_size = 32;
  cfg.entropy_coef = 0.01;
  EnvConfig env;
  const RewardParams reward;
  auto suite = default_suite_config();
  suite.demos_per_shape = 2;
  EpisodeSource source;
  source.chain = &chain;
  source.tasks = make_suite(chain, suite, 4);
  source.env = env;
  source.retarget = default_retarget_config(chain);
  source.augment = false;

  const int obs_dim = observation_layout(chain.dof(), env.horizon).size;
  ResidualPolicy policy(cfg, obs_dim, chain.dof(), 5);
  RolloutWorkers workers(chain, env, reward, source, cfg.num_envs, 5);
  PpoOptimizer optimizer(policy);
  Rng rng = make_rng(5, "ppo");
  // One update first so the ratios move away from one.
  RolloutBuffer first = collect_rollouts(policy, workers, cfg.rollout_length, rng);
  compute_advantages(first, cfg.discount, cfg.gae_lambda);
  ppo_update(policy, first, optimizer, rng);
  RolloutBuffer buffer = collect_rollouts(policy, workers, cfg.rollout_length, rng);
  compute_advantages(buffer, cfg.discount, cfg.gae_lambda);
  buffer.log_probs = buffer.log_probs.array() + 0.3 * Eigen::ArrayXd::Random(buffer.size());

  double worst = 0.0;
  double clipped = 0.0;
  const double h = 1e-6;
  for (int batch = 0; batch < 10; ++batch) {
    std::vector<int> idx(buffer.size());
    for (int i = 0; i < buffer.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.minibatch_size);
    const MinibatchGradients g = ppo_gradients(policy, buffer, idx);
    clipped += g.clip_fraction;
    auto fd = [&](Eigen::VectorXd& params, bool critic) {
      Eigen::VectorXd out(params.size());
      for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const auto up = ppo_gradients(policy, buffer, idx);
        params[i] = keep - h;
        const auto down = ppo_gradients(policy, buffer, idx);
        params[i] = keep;
        out[i] = critic ? (up.critic_objective - down.critic_objective) / (2 * h)
                        : (up.actor_objective - down.actor_objective) / (2 * h);
      }
      return out;
    };
    worst = std::max(worst, relative_error(fd(policy.actor().params(), false), g.actor_grad));
    worst = std::max(worst, relative_error(fd(policy.log_std(), false), g.log_std_grad));
    worst = std::max(worst, relative_error(fd(policy.critic().params(), true), g.critic_grad));
  }
  return {worst <= 1e-3, "10 minibatches of " + std::to_string(cfg.minibatch_size) +
                             ", worst relative err " + fmt("%.2e", worst) + ", mean clip fraction " +
                             fmt("%.3f", clipped / 10)};
}

// ---------------------------------------------------------------------------
// 6 and 7. Training runs

struct Run {
  TrainResult result;
  double seconds = 0.0;
  EnvConfig env;
  RewardParams reward;
};

class Experiments {
 public:
  explicit Experiments(const std::string& config_path)
      : cfg_(cli::load_experiment(config_path)), chain_(load_chain(cfg_.chain)) {
    retarget_ = retarget_config_from_json(cfg_.retarget, chain_);
    tasks_ = cli::load_tasks(chain_, cfg_.train.tasks, cfg_.seed, "train");
    validation_ = cli::load_tasks(chain_, *cfg_.train.validation, cfg_.seed, "validation");
    eval_tasks_ = cli::load_tasks(chain_, cfg_.eval.tasks, cfg_.seed, "eval");
  }

  const cli::ExperimentConfig& config() const { return cfg_; }
  const KinematicChain& chain() const { return chain_; }
  const std::vector<Task>& train_tasks() const { return tasks_; }
  const std::vector<Task>& eval_tasks() const { return eval_tasks_; }

  const Run& run(const std::string& name, const std::function<void(PolicyConfig&)>& tweak) {
    auto it = runs_.find(name);
    if (it != runs_.end()) return it->second;
    TrainSettings s;
    s.policy = cfg_.policy;
    tweak(s.policy);
    s.env = cfg_.env;
    s.reward = cfg_.reward;
    s.retarget = retarget_;
    s.augment_workspace = cfg_.train.augment_workspace;
    s.total_steps = cfg_.train.steps;
    s.eval_every = cfg_.train.eval_every;
    s.eval_seeds = cfg_.train.eval_seeds;
    std::cout << "  training " << name << " (" << s.total_steps << " steps)" << std::endl;
    const auto start = std::chrono::steady_clock::now();
    Run r;
    r.result = train(chain_, tasks_, validation_, s, cfg_.seed, [&](const CurveRow& row) {
      std::printf("    %7ld  reward %.4f  grasp %.3f  follow %.3f  %5.0fs\n", row.step,
                  row.mean_reward, row.sr_grasp, row.sr_follow, seconds_since(start));
      std::fflush(stdout);
    });
    r.seconds = seconds_since(start);
    r.env = cfg_.env;
    r.reward = cfg_.reward;
    apply_ablations(s.policy.ablations, r.env, r.reward);
    return runs_.emplace(name, std::move(r)).first->second;
  }

  // Episodes are judged under the staged reward settings of the main run so
  // every actor faces the same noise and the same success rules.
  EvalSettings eval_settings(const EnvConfig& env) const {
    EvalSettings e;
    e.env = env;
    e.reward = cfg_.reward;
    e.retarget = retarget_;
    e.seeds = cfg_.eval.seeds;
    return e;
  }

 private:
  cli::ExperimentConfig cfg_;
  KinematicChain chain_;
  RetargetConfig retarget_;
  std::vector<Task> tasks_;
  std::vector<Task> validation_;
  std::vector<Task> eval_tasks_;
  std::map<std::string, Run> runs_;
};

std::string rates(const EvalReport& r) {
  return r.actor + " grasp " + fmt("%.3f", r.sr_grasp) + " follow " + fmt("%.3f", r.sr_follow);
}

Verdict check_end_to_end(Experiments& ex) {
  const Run& run = ex.run("staged", [](PolicyConfig&) {});
  const auto settings = ex.eval_settings(run.env);
  ReplayActor position(RetargetMethod::kPosition);
  PolicyActor policy(run.result.best, "residual");
  const auto reports = compare({&position, &policy}, ex.chain(), ex.eval_tasks(), settings);
  const EvalReport& base = reports[0];
  const EvalReport& ours = reports[1];
  std::map<std::string, int> per_shape;
  for (const auto& t : ex.eval_tasks()) ++per_shape[t.object->id];
  int fewest = per_shape.empty() ? 0 : per_shape.begin()->second;
  for (const auto& [id, n] : per_shape) fewest = std::min(fewest, n);
  const double base_gap = base.sr_grasp - base.sr_follow;
  const double gap = ours.sr_grasp - ours.sr_follow;
  const bool setup = per_shape.size() >= 3 && fewest >= 20 && ours.episodes >= 200 &&
                     run.result.steps <= 200000 && run.seconds <= 1200.0 &&
                     settings.env.detection_noise == 0.005;
  const bool pass = setup && ours.sr_grasp >= base.sr_grasp + 0.20 && gap <= base_gap + 1e-12;
  return {pass, std::to_string(ours.episodes) + " episodes on " + std::to_string(per_shape.size()) +
                    " shapes; " + rates(base) + " (gap " + fmt("%.3f", base_gap) + "); " + rates(ours) +
                    " (gap " + fmt("%.3f", gap) + "); " + std::to_string(run.result.steps) +
                    " steps in " + fmt("%.0f", run.seconds) + " s"};
}

Verdict check_ablations(Experiments& ex) {
  const Run& staged = ex.run("staged", [](PolicyConfig&) {});
  const Run& sparse = ex.run("sparse", [](PolicyConfig& p) { p.ablations.sparse_reward = true; });
  const Run& no_aug = ex.run("no_aug", [](PolicyConfig& p) { p.ablations.use_data_aug = false; });

  const auto settings = ex.eval_settings(staged.env);
  PolicyActor staged_actor(staged.result.best, "staged");
  PolicyActor sparse_actor(sparse.result.best, "sparse");
  const auto seen = compare({&staged_actor, &sparse_actor}, ex.chain(), ex.eval_tasks(), settings);

  // Held out: the same demos moved to a part of the table the suite never
  // places objects in.
  Workspace held_out;
  held_out.min = Vec3(0.62, -0.15, 0.0);
  held_out.max = Vec3(0.72, 0.15, 0.0);
  held_out.yaw_min = -0.5;
  held_out.yaw_max = 0.5;
  const auto moved = relocate_tasks(ex.eval_tasks(), held_out, 77);
  PolicyActor aug_actor(staged.result.best, "augmented");
  PolicyActor plain_actor(no_aug.result.best, "no_aug");
  const auto far = compare({&aug_actor, &plain_actor}, ex.chain(), moved, settings);

  const double sparse_drop = seen[0].sr_grasp - seen[1].sr_grasp;
  const bool pass = sparse.result.steps == staged.result.steps &&
                    no_aug.result.steps == staged.result.steps && sparse_drop >= 0.30 &&
                    far[1].sr_grasp < far[0].sr_grasp;
  return {pass, rates(seen[0]) + ", " + rates(seen[1]) + " (drop " + fmt("%.3f", sparse_drop) +
                    "); held out: " + rates(far[0]) + ", " + rates(far[1])};
}

// ---------------------------------------------------------------------------
// 8. Determinism of the train and eval commands

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict check_determinism(const std::string& config_path) {
  const fs::path root = fs::temp_directory_path() / "handxfer_acceptance";
  fs::remove_all(root);
  std::ostringstream out;
  std::ostringstream err;
  std::vector<std::string> compared;
  std::vector<std::string> differing;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path dir = root / ("run" + std::to_string(pass));
    const int train_rc = cli::run({"handxfer", "train", "--config", config_path, "--out",
                                   (dir / "train").string()}, out, err);
    const int eval_rc = cli::run({"handxfer", "eval", "--config", config_path, "--checkpoint",
                                  (dir / "train" / "checkpoint_final.json").string(), "--out",
                                  (dir / "eval").string()}, out, err);
    if (train_rc != 0 || eval_rc != 0) return {false, "command failed: " + err.str()};
  }
  for (const char* file : {"train/curve.csv", "train/checkpoint_final.json", "train/manifest.json",
                           "eval/report.json", "eval/episodes.csv", "eval/manifest.json"}) {
    const std::string a = slurp(root / "run0" / file);
    const std::string b = slurp(root / "run1" / file);
    compared.push_back(file);
    if (a.empty() || a != b) differing.push_back(file);
  }
  fs::remove_all(root);
  std::string detail = std::to_string(compared.size()) + " files compared";
  for (const auto& f : differing) detail += ", differs: " + f;
  return {differing.empty(), detail};
}

}  // namespace
}  // namespace handxfer

int main(int argc, char** argv) {
  using namespace handxfer;
  CLI::App app("acceptance run");
  std::string config = HANDXFER_CONFIG_DIR "/default.json";
  std::string smoke = HANDXFER_CONFIG_DIR "/smoke.json";
  std::vector<int> only;
  app.add_option("--config", config, "experiment config for the training criteria");
  app.add_option("--smoke-config", smoke, "short config for the determinism check");
  app.add_option("criteria", only, "criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int n) { return only.empty() || std::count(only.begin(), only.end(), n) > 0; };
  std::optional<Experiments> experiments;
  auto ex = [&]() -> Experiments& {
    if (!experiments) experiments.emplace(config);
    return *experiments;
  };

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"kinematics", check_kinematics},
      {"retargeting", check_retargeting},
      {"augmentation", check_augmentation},
      {"reward", check_reward},
      {"ppo gradients", check_gradients},
      {"end to end", [&] { return check_end_to_end(ex()); }},
      {"ablations", [&] { return check_ablations(ex()); }},
      {"determinism", [&] { return check_determinism(smoke); }},
  };
  const double limits[] = {10, 60, 5, 1, 30, 0, 0, 0};

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!wanted(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = seconds_since(start);
    if (limits[i] > 0 && secs > limits[i]) {
      v.pass = false;
      v.detail += "; over the " + fmt("%.0f", limits[i]) + " s limit";
    }
    if (!v.pass) ++failures;
    std::printf("criterion %d %-14s %s  %s (%.1f s)\n", n, criteria[i].first.c_str(),
                v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
