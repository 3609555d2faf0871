#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "handxfer/env.hpp"
#include "handxfer/suite.hpp"

namespace handxfer {

struct EpisodeOutcome {
  bool grasped = false;
  bool followed = false;
  std::vector<double> position_errors;  // per frame from the switch time on, meters
  std::vector<double> rotation_errors;  // radians
};

// Throws SemanticError on a trace that is empty, skips frames, or stops
// before the demo end without a drop.
EpisodeOutcome judge_episode(const EpisodeTrace& trace, const DemoTrajectory& demo,
                             const EnvConfig& env, const RewardParams& reward);

// Something that picks the action for the current environment state.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual std::string name() const = 0;
  // Retargeter producing the primitive actions the actor sees.
  virtual RetargetMethod primitive_method() const { return RetargetMethod::kPosition; }
  // Must be safe to call concurrently from several threads.
  virtual JointConfig act(const GraspEnv& env, const Eigen::VectorXd& observation) const = 0;
};

// Replays the primitive actions of a retargeter.
class ReplayActor : public Actor {
 public:
  explicit ReplayActor(RetargetMethod method) : method_(method) {}
  std::string name() const override { return retarget_method_name(method_); }
  RetargetMethod primitive_method() const override { return method_; }
  JointConfig act(const GraspEnv& env, const Eigen::VectorXd&) const override {
    return env.primitive_action();
  }

 private:
  RetargetMethod method_;
};

struct EvalSettings {
  EnvConfig env;
  RewardParams reward;
  RetargetConfig retarget;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
};

// Seed of the episode running task `task` under evaluation seed `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t task);

struct EpisodeRecord {
  std::string task;
  std::string object;
  std::uint64_t seed = 0;
  EpisodeOutcome outcome;
  double total_reward = 0.0;
};

struct ObjectStats {
  int episodes = 0;
  double sr_grasp = 0.0;
  double sr_follow = 0.0;
  double e_p = 0.0;
  double e_r = 0.0;
};

struct EvalReport {
  std::string actor;
  int episodes = 0;
  double sr_grasp = 0.0;
  double sr_follow = 0.0;
  // Means of the per-episode mean errors over followed episodes; zero when
  // none followed.
  double e_p = 0.0;
  double e_r = 0.0;
  std::map<std::string, ObjectStats> per_object;
  std::vector<EpisodeRecord> records;
};

// Aggregates records in order.
EvalReport summarize(const std::string& actor, std::vector<EpisodeRecord> records);

// Episodes prepared once (detection noise and primitives) and reused.
struct PreparedEpisode {
  std::string task;
  Episode episode;
};

std::vector<PreparedEpisode> prepare_episodes(const KinematicChain& chain,
                                              const std::vector<Task>& tasks,
                                              const EvalSettings& settings,
                                              RetargetMethod method);

EvalReport evaluate_prepared(const Actor& actor, const KinematicChain& chain,
                             const std::vector<PreparedEpisode>& episodes,
                             const EvalSettings& settings);

// Runs every task under every seed. Deterministic for fixed seeds,
// independent of settings.jobs.
EvalReport evaluate(const Actor& actor, const KinematicChain& chain,
                    const std::vector<Task>& tasks, const EvalSettings& settings);

std::vector<EvalReport> compare(const std::vector<const Actor*>& actors,
                                const KinematicChain& chain, const std::vector<Task>& tasks,
                                const EvalSettings& settings);

// Wilson score interval for a binomial proportion.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
Interval binomial_interval(int successes, int trials, double z = 1.96);

// Per-episode rows: task,object,seed,grasped,followed,e_p,e_r,reward
std::string episodes_csv(const EvalReport& report);
nlohmann::json report_json(const EvalReport& report);
// One row per actor: method,episodes,sr_grasp,sr_follow,e_p,e_r
std::string comparison_csv(const std::vector<EvalReport>& reports);
// Aligned console table.
std::string comparison_table(const std::vector<EvalReport>& reports);

}  // namespace handxfer
