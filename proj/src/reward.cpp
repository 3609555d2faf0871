#include "handxfer/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"

namespace handxfer {

namespace {

// scale * exp(-x), kept strictly positive where it would underflow.
double decay(double scale, double x) {
  return std::max(scale * std::exp(-x), std::numeric_limits<double>::denorm_min());
}

}  // namespace

void validate(const RewardParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + ": must be positive");
    }
  };
  positive(p.beta_hand, "beta_hand");
  positive(p.gamma_hand, "gamma_hand");
  positive(p.beta_close, "beta_close");
  positive(p.gamma_close, "gamma_close");
  positive(p.beta_follow, "beta_follow");
  positive(p.gamma_follow, "gamma_follow");
  if (p.t0_offset < 0) throw ConfigError("t0_offset: must be non-negative");
}

nlohmann::json to_json(const RewardParams& p) {
  return {{"beta_hand", p.beta_hand},     {"gamma_hand", p.gamma_hand},
          {"beta_close", p.beta_close},   {"gamma_close", p.gamma_close},
          {"beta_follow", p.beta_follow}, {"gamma_follow", p.gamma_follow},
          {"t0_offset", p.t0_offset},     {"sparse", p.sparse}};
}

RewardParams reward_params_from_json(const nlohmann::json& j, const std::string& path) {
  RewardParams p;
  json_io::ObjectReader r(j, path);
  if (r.has("beta_hand")) p.beta_hand = r.number("beta_hand");
  if (r.has("gamma_hand")) p.gamma_hand = r.number("gamma_hand");
  if (r.has("beta_close")) p.beta_close = r.number("beta_close");
  if (r.has("gamma_close")) p.gamma_close = r.number("gamma_close");
  if (r.has("beta_follow")) p.beta_follow = r.number("beta_follow");
  if (r.has("gamma_follow")) p.gamma_follow = r.number("gamma_follow");
  if (r.has("t0_offset")) p.t0_offset = static_cast<int>(r.integer("t0_offset"));
  if (r.has("sparse")) p.sparse = r.boolean("sparse");
  r.finish();
  validate(p);
  return p;
}

int switch_time(const DemoTrajectory& demo, const RewardParams& params) {
  if (!demo.lift_index) {
    throw SemanticError("demo '" + demo.object_ref +
                        "' has no lift_index; the reward switch time is undefined");
  }
  return std::max(0, *demo.lift_index - params.t0_offset);
}

double hand_reward(const Fingertips& tips, const Fingertips& targets,
                   const RewardParams& params) {
  double sum = 0.0;
  for (int m = 0; m < 5; ++m) sum += (targets[m] - tips[m]).squaredNorm();
  return decay(params.beta_hand, params.gamma_hand * sum);
}

double object_reward(const Fingertips& tips, const Vec3& object, const Vec3& demo_object,
                     const RewardParams& params) {
  double close = 0.0;
  for (int m = 0; m < 5; ++m) close += (tips[m] - object).squaredNorm();
  return decay(params.beta_close, params.gamma_close * close) +
         decay(params.beta_follow, params.gamma_follow * (demo_object - object).squaredNorm());
}

double staged_reward(const RewardInputs& in, const RewardParams& params) {
  if (params.sparse) return in.terminal && in.followed ? 1.0 : 0.0;
  if (in.t < in.t0) return hand_reward(in.tips, in.demo_tips, params);
  return object_reward(in.tips, in.object, in.demo_object, params);
}

}  // namespace handxfer
