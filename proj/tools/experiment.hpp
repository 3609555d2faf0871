#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "handxfer/policy.hpp"

namespace handxfer::cli {

// Where a set of tasks comes from: a generated suite, or demo/object files.
struct TaskSource {
  std::optional<SuiteConfig> suite;
  std::optional<std::uint64_t> seed;  // suite seed; derived from the run seed if absent
  struct DemoFile {
    std::string demo;
    std::string object;
  };
  std::vector<DemoFile> demos;
  std::optional<Workspace> relocate;
  std::optional<std::uint64_t> relocate_seed;
};

struct TrainSection {
  TaskSource tasks;
  std::optional<TaskSource> validation;
  long steps = 200000;
  int eval_every = 10;
  std::vector<std::uint64_t> eval_seeds = {1};
  Workspace augment_workspace;
};

struct EvalSection {
  TaskSource tasks;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string chain;  // absolute path
  nlohmann::json retarget = nlohmann::json::object();  // parsed against the chain
  EnvConfig env;
  RewardParams reward;
  PolicyConfig policy;
  TrainSection train;
  EvalSection eval;
  std::string out;
};

Workspace default_augment_workspace();

// Relative paths resolve against `base_dir`. `seed` overrides the file's
// seed; one of the two must be present.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::string& base_dir,
                                      std::optional<std::uint64_t> seed = std::nullopt);
ExperimentConfig load_experiment(const std::string& path,
                                 std::optional<std::uint64_t> seed = std::nullopt);
// Fully resolved echo; loading it back reproduces the run.
nlohmann::json to_json(const ExperimentConfig& cfg);

std::vector<Task> load_tasks(const KinematicChain& chain, const TaskSource& source,
                             std::uint64_t run_seed, const std::string& stream);

}  // namespace handxfer::cli
