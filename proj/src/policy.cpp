#include "handxfer/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"
#include "handxfer/parallel.hpp"

namespace handxfer {

namespace {

using Json = nlohmann::json;

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

// log(1 - tanh(z)^2), stable for large |z|.
double log_one_minus_tanh2(double z) {
  const double a = std::abs(z);
  return 2.0 * (std::log(2.0) - a - std::log1p(std::exp(-2.0 * a)));
}

Json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& path, std::size_t size) {
  const auto values = json_io::as_numbers(j, path, size);
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(size));
}

double clip_norm(Eigen::VectorXd& g, double max_norm) {
  const double n = g.norm();
  if (max_norm > 0.0 && n > max_norm) g *= max_norm / n;
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void validate(const PolicyConfig& c) {
  if (c.hidden.empty()) throw ConfigError("policy.hidden: needs at least one layer");
  for (int h : c.hidden) {
    if (h < 1) throw ConfigError("policy.hidden: layer sizes must be positive");
  }
  if (!(c.action_std_init > 0.0)) throw ConfigError("policy.action_std_init: must be positive");
  if (!(c.clip_ratio > 0.0 && c.clip_ratio < 1.0)) {
    throw ConfigError("policy.clip_ratio: must lie in (0, 1)");
  }
  if (!(c.discount > 0.0 && c.discount <= 1.0)) {
    throw ConfigError("policy.discount: must lie in (0, 1]");
  }
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) {
    throw ConfigError("policy.gae_lambda: must lie in [0, 1]");
  }
  if (c.epochs < 1) throw ConfigError("policy.epochs: must be positive");
  if (c.minibatch_size < 1) throw ConfigError("policy.minibatch_size: must be positive");
  if (c.rollout_length < 1) throw ConfigError("policy.rollout_length: must be positive");
  if (c.num_envs < 1) throw ConfigError("policy.num_envs: must be positive");
  if (!(c.actor_lr > 0.0)) throw ConfigError("policy.actor_lr: must be positive");
  if (!(c.critic_lr > 0.0)) throw ConfigError("policy.critic_lr: must be positive");
  if (!(c.entropy_coef >= 0.0)) throw ConfigError("policy.entropy_coef: must be non-negative");
  if (!(c.max_grad_norm >= 0.0)) throw ConfigError("policy.max_grad_norm: must be non-negative");
  if (!(c.residual_scale > 0.0)) throw ConfigError("policy.residual_scale: must be positive");
  if (c.ablations.horizon_phi < 1) {
    throw ConfigError("policy.ablations.horizon_phi: must be at least 1");
  }
}

Json to_json(const PolicyConfig& c) {
  const auto& a = c.ablations;
  return {{"hidden", c.hidden},
          {"action_std_init", c.action_std_init},
          {"clip_ratio", c.clip_ratio},
          {"discount", c.discount},
          {"gae_lambda", c.gae_lambda},
          {"epochs", c.epochs},
          {"minibatch_size", c.minibatch_size},
          {"rollout_length", c.rollout_length},
          {"num_envs", c.num_envs},
          {"actor_lr", c.actor_lr},
          {"critic_lr", c.critic_lr},
          {"anneal_lr", c.anneal_lr},
          {"entropy_coef", c.entropy_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"residual_scale", c.residual_scale},
          {"ablations",
           {{"use_prim_actions", a.use_prim_actions},
            {"use_contacts", a.use_contacts},
            {"horizon_phi", a.horizon_phi},
            {"use_data_aug", a.use_data_aug},
            {"sparse_reward", a.sparse_reward}}}};
}

PolicyConfig policy_config_from_json(const Json& j, const std::string& path) {
  PolicyConfig c;
  json_io::ObjectReader r(j, path);
  if (r.has("hidden")) {
    const Json& h = r.required("hidden");
    if (!h.is_array()) throw SchemaError(r.child_path("hidden"), "expected an array");
    c.hidden.clear();
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (!h[i].is_number_integer()) {
        throw SchemaError(r.child_path("hidden") + "[" + std::to_string(i) + "]",
                          "expected an integer");
      }
      c.hidden.push_back(h[i].get<int>());
    }
  }
  auto num = [&](const char* key, double& field) {
    if (r.has(key)) field = r.number(key);
  };
  auto integer = [&](const char* key, int& field) {
    if (r.has(key)) field = static_cast<int>(r.integer(key));
  };
  num("action_std_init", c.action_std_init);
  num("clip_ratio", c.clip_ratio);
  num("discount", c.discount);
  num("gae_lambda", c.gae_lambda);
  integer("epochs", c.epochs);
  integer("minibatch_size", c.minibatch_size);
  integer("rollout_length", c.rollout_length);
  integer("num_envs", c.num_envs);
  num("actor_lr", c.actor_lr);
  num("critic_lr", c.critic_lr);
  if (r.has("anneal_lr")) c.anneal_lr = r.boolean("anneal_lr");
  num("entropy_coef", c.entropy_coef);
  num("max_grad_norm", c.max_grad_norm);
  num("residual_scale", c.residual_scale);
  if (r.has("ablations")) {
    json_io::ObjectReader a(r.required("ablations"), r.child_path("ablations"));
    auto& ab = c.ablations;
    if (a.has("use_prim_actions")) ab.use_prim_actions = a.boolean("use_prim_actions");
    if (a.has("use_contacts")) ab.use_contacts = a.boolean("use_contacts");
    if (a.has("horizon_phi")) ab.horizon_phi = static_cast<int>(a.integer("horizon_phi"));
    if (a.has("use_data_aug")) ab.use_data_aug = a.boolean("use_data_aug");
    if (a.has("sparse_reward")) ab.sparse_reward = a.boolean("sparse_reward");
    a.finish();
  }
  r.finish();
  validate(c);
  return c;
}

void apply_ablations(const Ablations& ablations, EnvConfig& env, RewardParams& reward) {
  env.observe_contacts = ablations.use_contacts;
  env.horizon = ablations.horizon_phi;
  reward.sparse = ablations.sparse_reward;
}

// ---------------------------------------------------------------------------
// Networks

Mlp::Mlp(int inputs, const std::vector<int>& hidden, int outputs) {
  sizes_.push_back(inputs);
  for (int h : hidden) sizes_.push_back(h);
  sizes_.push_back(outputs);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(at);
    at += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(at);
}

void Mlp::initialize(Rng& rng, double output_gain) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  params_.setZero();
  const std::size_t layers = offsets_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double gain = l + 1 == layers ? output_gain : 1.0;
    const double scale = gain / std::sqrt(static_cast<double>(in));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(in) * out; ++k) {
      params_[offsets_[l] + k] = scale * gauss(rng);
    }
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Cache cache;
  return forward(x, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
  if (x.rows() != inputs()) {
    throw DimensionError("network expects " + std::to_string(inputs()) + " inputs, got " +
                         std::to_string(x.rows()));
  }
  cache.activations.clear();
  cache.activations.push_back(x);
  const std::size_t layers = offsets_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + offsets_[l] + out * in, out);
    Eigen::MatrixXd z = w * cache.activations.back();
    z.colwise() += b;
    if (l + 1 == layers) return z;
    cache.activations.push_back(z.array().tanh().matrix());
  }
  return {};
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd g = grad_out;
  for (std::size_t l = offsets_.size(); l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const Eigen::MatrixXd& a = cache.activations[l];
    Eigen::Map<Eigen::MatrixXd>(grad.data() + offsets_[l], out, in) = g * a.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + offsets_[l] + out * in, out) = g.rowwise().sum();
    if (l == 0) break;
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    g = (w.transpose() * g).cwiseProduct((1.0 - a.array().square()).matrix());
  }
  return grad;
}

ObsNormalizer::ObsNormalizer(int size)
    : mean(Eigen::VectorXd::Zero(size)), var(Eigen::VectorXd::Ones(size)) {}

void ObsNormalizer::update(const Eigen::MatrixXd& batch) {
  const double n = static_cast<double>(batch.cols());
  if (n == 0.0) return;
  const Eigen::VectorXd batch_mean = batch.rowwise().mean();
  const Eigen::VectorXd batch_var =
      (batch.colwise() - batch_mean).array().square().rowwise().mean();
  if (count == 0.0) {
    mean = batch_mean;
    var = batch_var;
    count = n;
    return;
  }
  const double total = count + n;
  const Eigen::VectorXd delta = batch_mean - mean;
  mean += delta * (n / total);
  var = (var * count + batch_var * n + delta.array().square().matrix() * (count * n / total)) /
        total;
  count = total;
}

Eigen::MatrixXd ObsNormalizer::normalize(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean.size()) {
    throw DimensionError("observation has " + std::to_string(x.rows()) +
                         " entries, policy expects " + std::to_string(mean.size()));
  }
  const Eigen::ArrayXd inv_std = (var.array() + 1e-8).rsqrt();
  Eigen::MatrixXd out = ((x.colwise() - mean).array().colwise() * inv_std).matrix();
  return out.cwiseMax(-clip).cwiseMin(clip);
}

// ---------------------------------------------------------------------------
// Policy

ResidualPolicy::ResidualPolicy(const PolicyConfig& cfg, int observation_size, int action_size,
                               std::uint64_t seed)
    : cfg_(cfg),
      actor_(observation_size, cfg.hidden, action_size),
      critic_(observation_size, cfg.hidden, 1),
      log_std_(Eigen::VectorXd::Constant(action_size, std::log(cfg.action_std_init))),
      normalizer_(observation_size) {
  validate(cfg_);
  Rng rng = make_rng(seed, "policy");
  actor_.initialize(rng, 0.01);
  critic_.initialize(rng, 1.0);
}

ActOutput ResidualPolicy::act(const Eigen::VectorXd& observation, bool deterministic,
                              Rng* rng) const {
  return act_normalized(normalizer_.normalize(observation), deterministic, rng);
}

double ResidualPolicy::squashed_log_prob(const Eigen::VectorXd& mean,
                                         const Eigen::VectorXd& pre_squash) const {
  double lp = 0.0;
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double s = std::exp(log_std_[k]);
    const double u = (pre_squash[k] - mean[k]) / s;
    lp += -0.5 * u * u - log_std_[k] - kLogSqrt2Pi;
    lp -= std::log(cfg_.residual_scale) + log_one_minus_tanh2(pre_squash[k]);
  }
  return lp;
}

ActOutput ResidualPolicy::act_normalized(const Eigen::VectorXd& observation, bool deterministic,
                                         Rng* rng) const {
  if (observation.size() != observation_size()) {
    throw DimensionError("observation has " + std::to_string(observation.size()) +
                         " entries, policy expects " + std::to_string(observation_size()));
  }
  ActOutput out;
  const Eigen::VectorXd mean = actor_.forward(observation);
  out.pre_squash = mean;
  if (!deterministic) {
    if (rng == nullptr) throw Error("sampling a residual needs a random generator");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index k = 0; k < mean.size(); ++k) {
      out.pre_squash[k] += std::exp(log_std_[k]) * gauss(*rng);
    }
  }
  out.residual = cfg_.residual_scale * out.pre_squash.array().tanh().matrix();
  out.gaussian_log_prob =
      gaussian_log_prob(observation, out.pre_squash)[0];
  out.log_prob = squashed_log_prob(mean, out.pre_squash);
  out.value = critic_.forward(observation)(0, 0);
  return out;
}

Eigen::VectorXd ResidualPolicy::gaussian_log_prob(const Eigen::MatrixXd& normalized_obs,
                                                  const Eigen::MatrixXd& pre_squash) const {
  const Eigen::MatrixXd mean = actor_.forward(normalized_obs);
  const Eigen::ArrayXd inv_std = (-log_std_.array()).exp();
  const Eigen::MatrixXd u = ((pre_squash - mean).array().colwise() * inv_std).matrix();
  const double norm = log_std_.sum() + kLogSqrt2Pi * static_cast<double>(log_std_.size());
  return (-0.5 * u.colwise().squaredNorm().array() - norm).matrix().transpose();
}

JointConfig compose_action(const JointConfig& primitive, const JointConfig& residual) {
  if (primitive.size() != residual.size()) {
    throw DimensionError("primitive action has " + std::to_string(primitive.size()) +
                         " entries, residual has " + std::to_string(residual.size()));
  }
  return primitive + residual;
}

JointConfig PolicyActor::act(const GraspEnv& env, const Eigen::VectorXd& observation) const {
  const ActOutput out = policy_->act(observation, true, nullptr);
  const JointConfig primitive = policy_->config().ablations.use_prim_actions
                                    ? env.primitive_action()
                                    : JointConfig::Zero(env.chain().dof());
  return compose_action(primitive, out.residual);
}

// ---------------------------------------------------------------------------
// Rollouts

void RolloutBuffer::resize(int envs, int steps, int obs_dim, int act_dim) {
  num_envs = envs;
  length = steps;
  const int n = envs * steps;
  observations.resize(obs_dim, n);
  pre_squash.resize(act_dim, n);
  log_probs.resize(n);
  rewards.resize(n);
  values.resize(n);
  dones.resize(n);
  last_values = Eigen::VectorXd::Zero(envs);
  bootstrapped = false;
  advantages.resize(0);
  returns.resize(0);
  has_advantages = false;
}

void compute_advantages(RolloutBuffer& b, double discount, double lambda) {
  const int n = b.size();
  if (!b.bootstrapped || b.rewards.size() != n || b.values.size() != n || b.dones.size() != n ||
      b.last_values.size() != b.num_envs) {
    throw Error("rollout buffer is incomplete; collect a full rollout first");
  }
  b.advantages.resize(n);
  b.returns.resize(n);
  for (int e = 0; e < b.num_envs; ++e) {
    double next_value = b.last_values[e];
    double gae = 0.0;
    for (int t = b.length - 1; t >= 0; --t) {
      const int i = t * b.num_envs + e;
      const double live = 1.0 - b.dones[i];
      const double delta = b.rewards[i] + discount * next_value * live - b.values[i];
      gae = delta + discount * lambda * live * gae;
      b.advantages[i] = gae;
      b.returns[i] = gae + b.values[i];
      next_value = b.values[i];
    }
  }
  b.has_advantages = true;
}

Episode EpisodeSource::draw(Rng& rng) const {
  if (tasks.empty()) throw ConfigError("training needs at least one task");
  std::uniform_int_distribution<std::size_t> pick(0, tasks.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Task& task = tasks[pick(rng)];
  std::shared_ptr<const DemoTrajectory> demo = task.demo;
  if (augment) {
    const double yaw = workspace.yaw_min + unit(rng) * (workspace.yaw_max - workspace.yaw_min);
    const double ux = unit(rng);
    const double uy = unit(rng);
    const Vec3 start = demo->frames.front().object_pose.translation();
    Vec3 target = start;
    target.x() = workspace.min.x() + ux * (workspace.max.x() - workspace.min.x());
    target.y() = workspace.min.y() + uy * (workspace.max.y() - workspace.min.y());
    WorkspaceTransform t;
    t.yaw = yaw;
    t.translation = target - t.to_rigid().rotate(start);
    t.translation.z() = 0.0;
    demo = std::make_shared<const DemoTrajectory>(handxfer::augment(*demo, t));
  }
  const std::uint64_t seed = rng();
  return make_episode(*chain, env, retarget, RetargetMethod::kPosition, demo, task.object, seed);
}

RolloutWorkers::RolloutWorkers(const KinematicChain& chain, const EnvConfig& env,
                               const RewardParams& reward, EpisodeSource source, int num_envs,
                               std::uint64_t seed)
    : source_(std::move(source)), rng_(make_rng(seed, "env")) {
  for (int i = 0; i < num_envs; ++i) envs_.emplace_back(chain, env, reward);
  for (int i = 0; i < num_envs; ++i) obs_.push_back(envs_[i].reset(source_.draw(rng_)));
}

RolloutWorkers::Stats RolloutWorkers::take_stats() {
  Stats s = stats_;
  stats_ = Stats{};
  return s;
}

void RolloutWorkers::finish_episode(int i) {
  const EnvState& st = envs_[i].state();
  ++stats_.episodes;
  if (st.ever_attached && st.lifted) ++stats_.grasped;
  if (envs_[i].trace().frames.back().info.followed) ++stats_.followed;
  obs_[i] = envs_[i].reset(source_.draw(rng_));
}

void RolloutWorkers::add_reward(double r) {
  stats_.reward_sum += r;
  ++stats_.steps;
}

RolloutBuffer collect_rollouts(ResidualPolicy& policy, RolloutWorkers& workers, int length,
                               Rng& rng) {
  const int envs = workers.num_envs();
  const int obs_dim = policy.observation_size();
  const int act_dim = policy.action_size();
  for (int e = 0; e < envs; ++e) {
    if (workers.env(e).chain().dof() != act_dim ||
        workers.env(e).layout().size != obs_dim) {
      throw DimensionError("environment " + std::to_string(e) +
                           " does not match the policy dimensions");
    }
  }
  RolloutBuffer b;
  b.resize(envs, length, obs_dim, act_dim);
  Eigen::MatrixXd raw(obs_dim, envs * length);
  const bool use_prim = policy.config().ablations.use_prim_actions;
  for (int t = 0; t < length; ++t) {
    for (int e = 0; e < envs; ++e) {
      const int i = t * envs + e;
      GraspEnv& env = workers.env(e);
      raw.col(i) = workers.observation(e);
      const Eigen::VectorXd obs = policy.normalizer().normalize(raw.col(i));
      const ActOutput out = policy.act_normalized(obs, false, &rng);
      b.observations.col(i) = obs;
      b.pre_squash.col(i) = out.pre_squash;
      b.log_probs[i] = out.gaussian_log_prob;
      b.values[i] = out.value;
      const JointConfig primitive =
          use_prim ? env.primitive_action() : JointConfig::Zero(act_dim);
      const StepResult r = env.step(compose_action(primitive, out.residual));
      b.rewards[i] = r.reward;
      b.dones[i] = r.done ? 1.0 : 0.0;
      workers.add_reward(r.reward);
      if (r.done) {
        workers.finish_episode(e);
      } else {
        workers.observation(e) = env.observe();
      }
    }
  }
  for (int e = 0; e < envs; ++e) {
    const Eigen::VectorXd obs = policy.normalizer().normalize(workers.observation(e));
    b.last_values[e] = policy.critic().forward(obs)(0, 0);
  }
  b.bootstrapped = true;
  policy.normalizer().update(raw);
  return b;
}

// ---------------------------------------------------------------------------
// Updates

MinibatchGradients ppo_gradients(const ResidualPolicy& policy, const RolloutBuffer& buffer,
                                 const std::vector<int>& indices) {
  if (!buffer.has_advantages) throw Error("compute advantages before the update");
  const int n = static_cast<int>(indices.size());
  if (n == 0) throw Error("empty minibatch");
  const auto& cfg = policy.config();
  const int obs_dim = policy.observation_size();
  const int act_dim = policy.action_size();

  Eigen::MatrixXd obs(obs_dim, n);
  Eigen::MatrixXd z(act_dim, n);
  Eigen::VectorXd old_lp(n), adv(n), ret(n);
  for (int j = 0; j < n; ++j) {
    const int i = indices[j];
    obs.col(j) = buffer.observations.col(i);
    z.col(j) = buffer.pre_squash.col(i);
    old_lp[j] = buffer.log_probs[i];
    adv[j] = buffer.advantages[i];
    ret[j] = buffer.returns[i];
  }

  MinibatchGradients g;
  const Eigen::VectorXd& log_std = policy.log_std();
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();

  Mlp::Cache actor_cache;
  const Eigen::MatrixXd mean = policy.actor().forward(obs, actor_cache);
  const Eigen::MatrixXd diff = z - mean;
  const Eigen::MatrixXd scaled = (diff.array().colwise() * inv_var).matrix();  // (z-u)/s^2
  const double norm = log_std.sum() + kLogSqrt2Pi * act_dim;
  const double eps = cfg.clip_ratio;

  Eigen::MatrixXd grad_mean(act_dim, n);
  g.log_std_grad = Eigen::VectorXd::Zero(act_dim);
  double surrogate = 0.0;
  int clipped = 0;
  double kl = 0.0;
  for (int j = 0; j < n; ++j) {
    const double lp = -0.5 * diff.col(j).dot(scaled.col(j)) - norm;
    const double ratio = std::exp(lp - old_lp[j]);
    const double s1 = ratio * adv[j];
    const double s2 = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv[j];
    surrogate += -std::min(s1, s2);
    if (std::abs(ratio - 1.0) > eps) ++clipped;
    kl += (ratio - 1.0) - (lp - old_lp[j]);
    // d(-min)/d(log prob); zero on the clipped branch.
    const double dlp = s1 <= s2 ? -ratio * adv[j] / n : 0.0;
    grad_mean.col(j) = dlp * scaled.col(j);
    g.log_std_grad += dlp * (diff.col(j).array().square() * inv_var - 1.0).matrix();
  }
  g.entropy = log_std.sum() + (0.5 + kLogSqrt2Pi) * act_dim;
  g.actor_objective = surrogate / n - cfg.entropy_coef * g.entropy;
  g.log_std_grad.array() -= cfg.entropy_coef;
  g.actor_grad = policy.actor().backward(actor_cache, grad_mean);
  g.clip_fraction = static_cast<double>(clipped) / n;
  g.approx_kl = kl / n;

  Mlp::Cache critic_cache;
  const Eigen::MatrixXd values = policy.critic().forward(obs, critic_cache);
  const Eigen::RowVectorXd err = values.row(0) - ret.transpose();
  g.critic_objective = 0.5 * err.squaredNorm() / n;
  g.critic_grad = policy.critic().backward(critic_cache, err / n);
  return g;
}

Adam::Adam(Eigen::Index size, double lr)
    : lr_(lr), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

PpoOptimizer::PpoOptimizer(const ResidualPolicy& policy)
    : actor(policy.actor().params().size(), policy.config().actor_lr),
      log_std(policy.log_std().size(), policy.config().actor_lr),
      critic(policy.critic().params().size(), policy.config().critic_lr) {}

PpoStats ppo_update(ResidualPolicy& policy, const RolloutBuffer& buffer,
                    PpoOptimizer& optimizer, Rng& rng) {
  if (!buffer.has_advantages) throw Error("compute advantages before the update");
  const auto& cfg = policy.config();
  RolloutBuffer b = buffer;
  const double adv_mean = b.advantages.mean();
  const double adv_std =
      std::sqrt((b.advantages.array() - adv_mean).square().mean());
  b.advantages = (b.advantages.array() - adv_mean) / (adv_std + 1e-8);

  std::vector<int> order(static_cast<std::size_t>(b.size()));
  std::iota(order.begin(), order.end(), 0);
  PpoStats stats;
  int batches = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch_size));
      const std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(stop));
      MinibatchGradients g = ppo_gradients(policy, b, idx);
      if (!std::isfinite(g.actor_objective) || !std::isfinite(g.critic_objective) ||
          !g.actor_grad.allFinite() || !g.critic_grad.allFinite() ||
          !g.log_std_grad.allFinite()) {
        char msg[256];
        std::snprintf(msg, sizeof(msg),
                      "non-finite loss in update (epoch %d, policy loss %g, value loss %g, "
                      "kl %g); update aborted",
                      epoch, g.actor_objective, g.critic_objective, g.approx_kl);
        throw Error(msg);
      }
      // Clip the actor and log-std gradients jointly.
      Eigen::VectorXd actor_all(g.actor_grad.size() + g.log_std_grad.size());
      actor_all << g.actor_grad, g.log_std_grad;
      clip_norm(actor_all, cfg.max_grad_norm);
      clip_norm(g.critic_grad, cfg.max_grad_norm);
      const Eigen::VectorXd actor_part = actor_all.head(g.actor_grad.size());
      const Eigen::VectorXd std_part = actor_all.tail(g.log_std_grad.size());
      optimizer.actor.step(policy.actor().params(), actor_part);
      optimizer.log_std.step(policy.log_std(), std_part);
      optimizer.critic.step(policy.critic().params(), g.critic_grad);

      stats.policy_loss += g.actor_objective;
      stats.value_loss += g.critic_objective;
      stats.entropy += g.entropy;
      stats.clip_fraction += g.clip_fraction;
      stats.approx_kl += g.approx_kl;
      ++batches;
    }
  }
  if (batches > 0) {
    stats.policy_loss /= batches;
    stats.value_loss /= batches;
    stats.entropy /= batches;
    stats.clip_fraction /= batches;
    stats.approx_kl /= batches;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Training

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string out = "step,mean_reward,sr_grasp,sr_follow,e_p,e_r\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%ld,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step, r.mean_reward,
                  r.sr_grasp, r.sr_follow, r.e_p, r.e_r);
    out += line;
  }
  return out;
}

TrainResult train(const KinematicChain& chain, const std::vector<Task>& tasks,
                  const std::vector<Task>& validation, const TrainSettings& settings,
                  std::uint64_t seed, const TrainProgress& progress) {
  if (tasks.empty()) throw ConfigError("training needs at least one task");
  if (settings.total_steps < 0) throw ConfigError("train.steps: must be non-negative");
  const PolicyConfig& cfg = settings.policy;
  validate(cfg);
  EnvConfig env = settings.env;
  RewardParams reward = settings.reward;
  apply_ablations(cfg.ablations, env, reward);
  validate(env);
  validate(reward);

  const int obs_dim = observation_layout(chain.dof(), env.horizon).size;
  ResidualPolicy policy(cfg, obs_dim, chain.dof(), seed);
  TrainResult result;
  result.initial = policy;
  result.best = policy;

  EpisodeSource source;
  source.chain = &chain;
  source.tasks = tasks;
  source.env = env;
  source.retarget = settings.retarget;
  source.augment = cfg.ablations.use_data_aug;
  source.workspace = settings.augment_workspace;

  EvalSettings eval;
  eval.env = env;
  eval.reward = reward;
  eval.retarget = settings.retarget;
  eval.seeds = settings.eval_seeds;
  eval.jobs = settings.jobs;
  const bool validating = settings.eval_every > 0 && !validation.empty();
  std::vector<PreparedEpisode> prepared;
  if (validating) prepared = prepare_episodes(chain, validation, eval, RetargetMethod::kPosition);

  double best_follow = -1.0;
  auto record = [&](long step, double mean_reward) {
    CurveRow row;
    row.step = step;
    row.mean_reward = mean_reward;
    if (validating) {
      const EvalReport rep = evaluate_prepared(PolicyActor(policy), chain, prepared, eval);
      row.sr_grasp = rep.sr_grasp;
      row.sr_follow = rep.sr_follow;
      row.e_p = rep.e_p;
      row.e_r = rep.e_r;
      if (rep.sr_follow > best_follow) {
        best_follow = rep.sr_follow;
        result.best = policy;
      }
    }
    result.curve.push_back(row);
    if (progress) progress(row);
  };

  const long per_update = static_cast<long>(cfg.num_envs) * cfg.rollout_length;
  const long updates = settings.total_steps / per_update;
  record(0, 0.0);
  if (updates > 0) {
    RolloutWorkers workers(chain, env, reward, source, cfg.num_envs, seed);
    PpoOptimizer optimizer(policy);
    Rng rng = make_rng(seed, "ppo");
    for (long u = 1; u <= updates; ++u) {
      if (cfg.anneal_lr) {
        const double frac = 1.0 - static_cast<double>(u - 1) / static_cast<double>(updates);
        optimizer.actor.set_lr(frac * cfg.actor_lr);
        optimizer.log_std.set_lr(frac * cfg.actor_lr);
        optimizer.critic.set_lr(frac * cfg.critic_lr);
      }
      RolloutBuffer buffer = collect_rollouts(policy, workers, cfg.rollout_length, rng);
      compute_advantages(buffer, cfg.discount, cfg.gae_lambda);
      ppo_update(policy, buffer, optimizer, rng);
      result.steps += per_update;
      if (u == updates || (settings.eval_every > 0 && u % settings.eval_every == 0)) {
        const auto stats = workers.take_stats();
        record(result.steps, stats.steps > 0 ? stats.reward_sum / stats.steps : 0.0);
      }
    }
  }
  result.final_policy = policy;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string serialize_checkpoint(const ResidualPolicy& policy, const EnvConfig& env,
                                 const RewardParams& reward) {
  const auto& n = policy.normalizer();
  const Json j = {{"format", "handxfer-checkpoint"},
                  {"version", 1},
                  {"policy", to_json(policy.config())},
                  {"env", to_json(env)},
                  {"reward", to_json(reward)},
                  {"observation_size", policy.observation_size()},
                  {"action_size", policy.action_size()},
                  {"actor", vector_json(policy.actor().params())},
                  {"critic", vector_json(policy.critic().params())},
                  {"log_std", vector_json(policy.log_std())},
                  {"normalizer",
                   {{"mean", vector_json(n.mean)},
                    {"var", vector_json(n.var)},
                    {"count", n.count},
                    {"clip", n.clip}}}};
  return json_io::dump(j);
}

Checkpoint parse_checkpoint(const std::string& text) {
  const Json root = json_io::parse(text);
  json_io::ObjectReader r(root, "");
  if (r.string("format") != "handxfer-checkpoint") {
    throw SchemaError("format", "not a policy checkpoint");
  }
  if (r.integer("version") != 1) throw SchemaError("version", "unsupported version");
  Checkpoint c;
  const PolicyConfig cfg = policy_config_from_json(r.required("policy"), "policy");
  c.env = env_config_from_json(r.required("env"), "env");
  c.reward = reward_params_from_json(r.required("reward"), "reward");
  const long long obs = r.integer("observation_size");
  const long long act = r.integer("action_size");
  if (obs < 1 || act < 1) throw SchemaError("observation_size", "must be positive");
  c.policy = ResidualPolicy(cfg, static_cast<int>(obs), static_cast<int>(act), 0);
  auto& p = c.policy;
  p.actor().params() = vector_from_json(r.required("actor"), "actor",
                                        static_cast<std::size_t>(p.actor().params().size()));
  p.critic().params() = vector_from_json(r.required("critic"), "critic",
                                         static_cast<std::size_t>(p.critic().params().size()));
  p.log_std() = vector_from_json(r.required("log_std"), "log_std", static_cast<std::size_t>(act));
  json_io::ObjectReader nr(r.required("normalizer"), "normalizer");
  p.normalizer().mean = vector_from_json(nr.required("mean"), "normalizer.mean",
                                         static_cast<std::size_t>(obs));
  p.normalizer().var = vector_from_json(nr.required("var"), "normalizer.var",
                                        static_cast<std::size_t>(obs));
  p.normalizer().count = nr.number("count");
  p.normalizer().clip = nr.number("clip");
  nr.finish();
  r.finish();
  if (observation_layout(static_cast<int>(act), c.env.horizon).size != obs) {
    throw SchemaError("observation_size", "does not match the env horizon and action size");
  }
  return c;
}

}  // namespace handxfer
