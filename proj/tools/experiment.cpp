#include "experiment.hpp"

#include <filesystem>

#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"
#include "handxfer/random.hpp"

namespace handxfer::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string resolve(const std::string& base, const std::string& path, const std::string& where) {
  fs::path p(path);
  if (p.is_relative()) p = fs::path(base) / p;
  p = p.lexically_normal();
  if (!fs::exists(p)) throw ConfigError(where + ": no such file '" + p.string() + "'");
  return fs::absolute(p).string();
}

std::uint64_t as_seed(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw SchemaError(path, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

std::vector<std::uint64_t> as_seeds(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw SchemaError(path, "expected a non-empty array of seeds");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_seed(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

TaskSource task_source_from_json(const Json& j, const std::string& base, const std::string& path) {
  TaskSource s;
  json_io::ObjectReader r(j, path);
  if (r.has("suite")) s.suite = suite_config_from_json(r.required("suite"), r.child_path("suite"));
  if (r.has("seed")) s.seed = as_seed(r.required("seed"), r.child_path("seed"));
  if (r.has("demos")) {
    const Json& arr = r.required("demos");
    const std::string p = r.child_path("demos");
    if (!arr.is_array() || arr.empty()) throw SchemaError(p, "expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ip = p + "[" + std::to_string(i) + "]";
      json_io::ObjectReader d(arr[i], ip);
      TaskSource::DemoFile f;
      f.demo = resolve(base, d.string("demo"), ip + ".demo");
      f.object = resolve(base, d.string("object"), ip + ".object");
      d.finish();
      s.demos.push_back(f);
    }
  }
  if (r.has("relocate")) {
    json_io::ObjectReader rr(r.required("relocate"), r.child_path("relocate"));
    s.relocate = workspace_from_json(rr.required("workspace"), rr.child_path("workspace"));
    if (rr.has("seed")) s.relocate_seed = as_seed(rr.required("seed"), rr.child_path("seed"));
    rr.finish();
  }
  r.finish();
  if (s.suite && !s.demos.empty()) throw ConfigError(path + ": give either suite or demos");
  if (!s.suite && s.demos.empty()) s.suite = default_suite_config();
  return s;
}

Json to_json(const TaskSource& s) {
  Json j = Json::object();
  if (s.suite) j["suite"] = to_json(*s.suite);
  if (s.seed) j["seed"] = *s.seed;
  if (!s.demos.empty()) {
    j["demos"] = Json::array();
    for (const auto& d : s.demos) j["demos"].push_back({{"demo", d.demo}, {"object", d.object}});
  }
  if (s.relocate) {
    j["relocate"] = {{"workspace", to_json(*s.relocate)}};
    if (s.relocate_seed) j["relocate"]["seed"] = *s.relocate_seed;
  }
  return j;
}

}  // namespace

Workspace default_augment_workspace() {
  Workspace w;
  w.min = Vec3(0.35, -0.25, 0.0);
  w.max = Vec3(0.75, 0.25, 0.0);
  w.yaw_min = -0.8;
  w.yaw_max = 0.8;
  return w;
}

ExperimentConfig experiment_from_json(const Json& j, const std::string& base,
                                      std::optional<std::uint64_t> seed) {
  ExperimentConfig c;
  c.train.augment_workspace = default_augment_workspace();
  json_io::ObjectReader r(j, "");
  if (seed) {
    c.seed = *seed;
    if (r.has("seed")) r.required("seed");
  } else if (r.has("seed")) {
    c.seed = as_seed(r.required("seed"), "seed");
  } else {
    throw ConfigError("seed: missing; set it in the config or pass --seed");
  }
  c.chain = resolve(base, r.string("chain"), "chain");
  if (r.has("retarget")) c.retarget = r.required("retarget");
  if (r.has("env")) c.env = env_config_from_json(r.required("env"), "env");
  if (r.has("reward")) c.reward = reward_params_from_json(r.required("reward"), "reward");
  if (r.has("policy")) c.policy = policy_config_from_json(r.required("policy"), "policy");
  if (r.has("train")) {
    json_io::ObjectReader t(r.required("train"), "train");
    if (t.has("tasks")) c.train.tasks = task_source_from_json(t.required("tasks"), base, "train.tasks");
    if (t.has("validation")) {
      c.train.validation = task_source_from_json(t.required("validation"), base, "train.validation");
    }
    if (t.has("steps")) c.train.steps = t.integer("steps");
    if (t.has("eval_every")) c.train.eval_every = static_cast<int>(t.integer("eval_every"));
    if (t.has("eval_seeds")) c.train.eval_seeds = as_seeds(t.required("eval_seeds"), "train.eval_seeds");
    if (t.has("augment_workspace")) {
      c.train.augment_workspace =
          workspace_from_json(t.required("augment_workspace"), "train.augment_workspace");
    }
    t.finish();
    if (c.train.steps < 0) throw ConfigError("train.steps: must be non-negative");
    if (c.train.eval_every < 0) throw ConfigError("train.eval_every: must be non-negative");
  } else {
    c.train.tasks.suite = default_suite_config();
  }
  if (r.has("eval")) {
    json_io::ObjectReader e(r.required("eval"), "eval");
    if (e.has("tasks")) c.eval.tasks = task_source_from_json(e.required("tasks"), base, "eval.tasks");
    if (e.has("seeds")) c.eval.seeds = as_seeds(e.required("seeds"), "eval.seeds");
    e.finish();
  } else {
    c.eval.tasks.suite = default_suite_config();
  }
  if (!c.train.tasks.suite && c.train.tasks.demos.empty()) {
    c.train.tasks.suite = default_suite_config();
  }
  if (!c.eval.tasks.suite && c.eval.tasks.demos.empty()) c.eval.tasks.suite = default_suite_config();
  if (r.has("out")) c.out = r.string("out");
  r.finish();
  return c;
}

ExperimentConfig load_experiment(const std::string& path, std::optional<std::uint64_t> seed) {
  const Json j = json_io::parse(json_io::read_file(path));
  const std::string base = fs::absolute(fs::path(path)).parent_path().string();
  return experiment_from_json(j, base, seed);
}

Json to_json(const ExperimentConfig& c) {
  Json train = {{"tasks", to_json(c.train.tasks)},
                {"steps", c.train.steps},
                {"eval_every", c.train.eval_every},
                {"eval_seeds", c.train.eval_seeds},
                {"augment_workspace", to_json(c.train.augment_workspace)}};
  if (c.train.validation) train["validation"] = to_json(*c.train.validation);
  Json j = {{"seed", c.seed},
            {"chain", c.chain},
            {"retarget", c.retarget},
            {"env", to_json(c.env)},
            {"reward", to_json(c.reward)},
            {"policy", to_json(c.policy)},
            {"train", train},
            {"eval", {{"tasks", to_json(c.eval.tasks)}, {"seeds", c.eval.seeds}}}};
  if (!c.out.empty()) j["out"] = c.out;
  return j;
}

std::vector<Task> load_tasks(const KinematicChain& chain, const TaskSource& source,
                             std::uint64_t run_seed, const std::string& stream) {
  std::vector<Task> tasks;
  if (source.suite) {
    const std::uint64_t seed = source.seed ? *source.seed : substream_seed(run_seed, stream);
    tasks = make_suite(chain, *source.suite, seed);
  } else {
    for (const auto& f : source.demos) {
      Task t;
      t.name = fs::path(f.demo).stem().string();
      auto demo = load_trajectory(f.demo);
      auto object = load_object_model(f.object);
      if (demo.object_ref != object.id) {
        throw ConfigError("demo '" + f.demo + "' references object '" + demo.object_ref +
                          "' but '" + f.object + "' holds '" + object.id + "'");
      }
      t.demo = std::make_shared<const DemoTrajectory>(std::move(demo));
      t.object = std::make_shared<const ObjectModel>(std::move(object));
      tasks.push_back(std::move(t));
    }
  }
  if (source.relocate) {
    const std::uint64_t seed = source.relocate_seed ? *source.relocate_seed
                                                    : substream_seed(run_seed, stream + "/relocate");
    tasks = relocate_tasks(tasks, *source.relocate, seed);
  }
  return tasks;
}

}  // namespace handxfer::cli
