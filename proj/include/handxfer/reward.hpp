#pragma once

#include <array>

#include <json.hpp>

#include "handxfer/trajectory.hpp"

namespace handxfer {

using Fingertips = std::array<Vec3, 5>;

struct RewardParams {
  double beta_hand = 1.0;
  double gamma_hand = 20.0;
  double beta_close = 0.5;
  double gamma_close = 20.0;
  double beta_follow = 1.0;
  double gamma_follow = 100.0;
  int t0_offset = 15;  // frames before the lift at which the object stage starts
  bool sparse = false;
};

void validate(const RewardParams& params);
nlohmann::json to_json(const RewardParams& params);
RewardParams reward_params_from_json(const nlohmann::json& j,
                                     const std::string& path = "reward");

// max(0, lift_index - t0_offset). Throws SemanticError without a lift index.
int switch_time(const DemoTrajectory& demo, const RewardParams& params);

// beta_hand * exp(-gamma_hand * sum_m ||target_m - tip_m||^2)
double hand_reward(const Fingertips& tips, const Fingertips& targets,
                   const RewardParams& params);

// beta_close * exp(-gamma_close * sum_m ||tip_m - object||^2)
//   + beta_follow * exp(-gamma_follow * ||demo_object - object||^2)
double object_reward(const Fingertips& tips, const Vec3& object, const Vec3& demo_object,
                     const RewardParams& params);

// Everything the staged reward looks at for one transition.
struct RewardInputs {
  int t = 0;                // frame index reached by the transition
  int t0 = 0;               // switch_time of the episode's demo
  Fingertips tips;          // robot fingertips
  Fingertips demo_tips;     // demo fingertips, scaled into robot space
  Vec3 object = Vec3::Zero();
  Vec3 demo_object = Vec3::Zero();
  bool terminal = false;
  bool followed = false;    // episode ended with the object carried along the path
};

// Hand stage before t0, object stage from t0 on. Sparse mode pays 1 only on a
// terminal transition that completed the follow.
double staged_reward(const RewardInputs& in, const RewardParams& params);

}  // namespace handxfer
