#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "handxfer/env.hpp"
#include "handxfer/eval.hpp"
#include "handxfer/random.hpp"
#include "handxfer/suite.hpp"

namespace handxfer {

struct Ablations {
  bool use_prim_actions = true;
  bool use_contacts = true;
  int horizon_phi = 4;
  bool use_data_aug = true;
  bool sparse_reward = false;
};

struct PolicyConfig {
  std::vector<int> hidden = {256, 256};
  double action_std_init = 0.2;  // std of the Gaussian before squashing
  double clip_ratio = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  int epochs = 4;
  int minibatch_size = 512;
  int rollout_length = 128;  // steps per environment per update
  int num_envs = 8;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  bool anneal_lr = false;  // decay both rates linearly to zero over training
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  double residual_scale = 0.025;
  Ablations ablations;
};

void validate(const PolicyConfig& cfg);
nlohmann::json to_json(const PolicyConfig& cfg);
PolicyConfig policy_config_from_json(const nlohmann::json& j,
                                     const std::string& path = "policy");

// Applies the observation and reward ablations to the environment settings.
void apply_ablations(const Ablations& ablations, EnvConfig& env, RewardParams& reward);

// Fully connected network, tanh hidden layers, linear output. Parameters
// live in one flat vector: per layer the column-major weight matrix
// (out x in) followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int inputs, const std::vector<int>& hidden, int outputs);

  // Scaled Gaussian weights (std gain / sqrt(fan_in)), zero biases; the last
  // layer uses `output_gain`.
  void initialize(Rng& rng, double output_gain);

  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input, then each hidden layer
  };
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;
  // Gradient of sum(grad_out .* output) with respect to the parameters.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& grad_out) const;

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Eigen::VectorXd params_;
};

// Running mean / variance of observations.
struct ObsNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double count = 0.0;
  double clip = 5.0;

  explicit ObsNormalizer(int size = 0);
  void update(const Eigen::MatrixXd& batch);  // columns are samples
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& x) const;
};

struct ActOutput {
  Eigen::VectorXd residual;   // in [-residual_scale, residual_scale]
  Eigen::VectorXd pre_squash; // Gaussian sample before tanh
  double log_prob = 0.0;      // density of `residual`, squashing included
  double gaussian_log_prob = 0.0;
  double value = 0.0;
};

class ResidualPolicy {
 public:
  ResidualPolicy() = default;
  ResidualPolicy(const PolicyConfig& cfg, int observation_size, int action_size,
                 std::uint64_t seed);

  const PolicyConfig& config() const { return cfg_; }
  int observation_size() const { return actor_.inputs(); }
  int action_size() const { return actor_.outputs(); }

  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  Eigen::VectorXd& log_std() { return log_std_; }
  const Eigen::VectorXd& log_std() const { return log_std_; }
  ObsNormalizer& normalizer() { return normalizer_; }
  const ObsNormalizer& normalizer() const { return normalizer_; }

  // Raw observation in; `rng` is only used when sampling.
  ActOutput act(const Eigen::VectorXd& observation, bool deterministic, Rng* rng) const;
  // Same, on an already normalized observation.
  ActOutput act_normalized(const Eigen::VectorXd& observation, bool deterministic,
                           Rng* rng) const;

  // Gaussian log density of pre-squash samples (columns) under the current
  // parameters, and the squashed density of the matching residuals.
  Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& normalized_obs,
                                    const Eigen::MatrixXd& pre_squash) const;
  double squashed_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& pre_squash) const;

 private:
  PolicyConfig cfg_;
  Mlp actor_;
  Mlp critic_;
  Eigen::VectorXd log_std_;
  ObsNormalizer normalizer_;
};

// a_p + a_r; throws DimensionError on a length mismatch.
JointConfig compose_action(const JointConfig& primitive, const JointConfig& residual);

// Deterministic residual policy as an evaluation actor.
class PolicyActor : public Actor {
 public:
  PolicyActor(const ResidualPolicy& policy, std::string name = "residual")
      : policy_(&policy), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  JointConfig act(const GraspEnv& env, const Eigen::VectorXd& observation) const override;

 private:
  const ResidualPolicy* policy_;
  std::string name_;
};

// Columns are time-major: index = t * num_envs + env.
struct RolloutBuffer {
  int num_envs = 0;
  int length = 0;
  Eigen::MatrixXd observations;  // normalized, obs_dim x N
  Eigen::MatrixXd pre_squash;    // act_dim x N
  Eigen::VectorXd log_probs;     // Gaussian part
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  Eigen::VectorXd dones;         // 1 when the transition ended the episode
  Eigen::VectorXd last_values;   // bootstrap value per env after the last step
  bool bootstrapped = false;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  bool has_advantages = false;

  int size() const { return num_envs * length; }
  void resize(int envs, int steps, int obs_dim, int act_dim);
};

// Generalized advantage estimation per environment column.
void compute_advantages(RolloutBuffer& buffer, double discount, double lambda);

// Source of training episodes: draws a task, optionally relocates it within
// the augmentation workspace, and draws fresh detection noise.
struct EpisodeSource {
  const KinematicChain* chain = nullptr;
  std::vector<Task> tasks;
  EnvConfig env;
  RetargetConfig retarget;
  bool augment = false;
  Workspace workspace;

  Episode draw(Rng& rng) const;
};

// Persistent set of environments stepped in lockstep.
class RolloutWorkers {
 public:
  RolloutWorkers(const KinematicChain& chain, const EnvConfig& env, const RewardParams& reward,
                 EpisodeSource source, int num_envs, std::uint64_t seed);

  int num_envs() const { return static_cast<int>(envs_.size()); }
  GraspEnv& env(int i) { return envs_[i]; }
  const EpisodeSource& source() const { return source_; }

  struct Stats {
    int episodes = 0;
    int grasped = 0;
    int followed = 0;
    double reward_sum = 0.0;
    int steps = 0;
  };
  // Counters since the last call.
  Stats take_stats();

  // Used by collect_rollouts.
  Eigen::VectorXd& observation(int i) { return obs_[i]; }
  Rng& rng() { return rng_; }
  void finish_episode(int i);
  void add_reward(double r);

 private:
  EpisodeSource source_;
  std::vector<GraspEnv> envs_;
  std::vector<Eigen::VectorXd> obs_;
  Rng rng_;
  Stats stats_;
};

// Steps every worker `length` times. The normalizer is updated with the raw
// observations seen, after the rollout.
RolloutBuffer collect_rollouts(ResidualPolicy& policy, RolloutWorkers& workers, int length,
                               Rng& rng);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Losses and gradients on one minibatch, without touching the parameters.
// actor objective = clipped surrogate loss - entropy_coef * entropy
// critic objective = 0.5 * mean squared return error
struct MinibatchGradients {
  double actor_objective = 0.0;
  double critic_objective = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  Eigen::VectorXd actor_grad;
  Eigen::VectorXd log_std_grad;
  Eigen::VectorXd critic_grad;
};
MinibatchGradients ppo_gradients(const ResidualPolicy& policy, const RolloutBuffer& buffer,
                                 const std::vector<int>& indices);

class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double lr);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
};

struct PpoOptimizer {
  Adam actor;
  Adam log_std;
  Adam critic;
  explicit PpoOptimizer(const ResidualPolicy& policy);
};

// Clipped-surrogate epochs over the buffer. Throws Error on a non-finite loss.
PpoStats ppo_update(ResidualPolicy& policy, const RolloutBuffer& buffer,
                    PpoOptimizer& optimizer, Rng& rng);

struct CurveRow {
  long step = 0;
  double mean_reward = 0.0;  // mean per-step reward since the previous row
  double sr_grasp = 0.0;
  double sr_follow = 0.0;
  double e_p = 0.0;
  double e_r = 0.0;
};

std::string curve_csv(const std::vector<CurveRow>& rows);

struct TrainSettings {
  PolicyConfig policy;
  EnvConfig env;          // before ablations
  RewardParams reward;    // before ablations
  RetargetConfig retarget;
  Workspace augment_workspace;
  long total_steps = 200000;
  int eval_every = 10;    // updates between validation runs; 0 disables
  std::vector<std::uint64_t> eval_seeds = {1};
  int jobs = 1;
};

struct TrainResult {
  ResidualPolicy initial;
  ResidualPolicy final_policy;
  ResidualPolicy best;  // highest validation SR_Follow, ties to the earlier
  std::vector<CurveRow> curve;
  long steps = 0;
};

using TrainProgress = std::function<void(const CurveRow&)>;

// Deterministic for a fixed seed. Validation runs the deterministic policy
// on `validation` tasks with the eval module.
TrainResult train(const KinematicChain& chain, const std::vector<Task>& tasks,
                  const std::vector<Task>& validation, const TrainSettings& settings,
                  std::uint64_t seed, const TrainProgress& progress = {});

// Checkpoints: JSON with the policy config, the environment settings the
// policy was trained with, all parameters and the normalizer state.
struct Checkpoint {
  ResidualPolicy policy;
  EnvConfig env;
  RewardParams reward;
};
std::string serialize_checkpoint(const ResidualPolicy& policy, const EnvConfig& env,
                                 const RewardParams& reward);
Checkpoint parse_checkpoint(const std::string& text);

}  // namespace handxfer
