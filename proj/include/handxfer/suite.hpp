#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "handxfer/kinematics.hpp"
#include "handxfer/trajectory.hpp"

namespace handxfer {

// One demonstration with the object it manipulates.
struct Task {
  std::string name;
  std::shared_ptr<const DemoTrajectory> demo;
  std::shared_ptr<const ObjectModel> object;
};

struct SuiteShape {
  std::string name;
  ObjectShape shape;
};

// Synthetic task suite: `demos_per_shape` demos per shape, each with its own
// object placement, object yaw and motion seed.
struct SuiteConfig {
  std::vector<SuiteShape> shapes;
  int demos_per_shape = 20;
  Eigen::Vector2d xy_min = Eigen::Vector2d(0.40, -0.15);
  Eigen::Vector2d xy_max = Eigen::Vector2d(0.50, 0.15);
  double yaw_min = -0.5;
  double yaw_max = 0.5;
  SynthSpec base;  // shape, object_xy, object_yaw and object_id are overridden
};

// Sphere, cube and upright cylinder sized for the toy hand.
SuiteConfig default_suite_config();

void validate(const SuiteConfig& cfg);
nlohmann::json to_json(const SuiteConfig& cfg);
SuiteConfig suite_config_from_json(const nlohmann::json& j, const std::string& path = "suite");

nlohmann::json to_json(const SynthSpec& spec);
// Fields not present keep the values of `base`.
SynthSpec synth_spec_from_json(const nlohmann::json& j, const SynthSpec& base,
                               const std::string& path = "synth");

nlohmann::json to_json(const Workspace& w);
Workspace workspace_from_json(const nlohmann::json& j, const std::string& path = "workspace");

// Tasks are ordered shape-major; names are "<shape>_<index>".
std::vector<Task> make_suite(const KinematicChain& chain, const SuiteConfig& cfg,
                             std::uint64_t seed);

// Moves every task by one transform drawn from `workspace` (seeded per task).
std::vector<Task> relocate_tasks(const std::vector<Task>& tasks, const Workspace& workspace,
                                 std::uint64_t seed);

}  // namespace handxfer
