#include "cli.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "experiment.hpp"
#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"
#include "handxfer/parallel.hpp"
#include "handxfer/random.hpp"

namespace handxfer::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct StageError {
  std::string stage;
  std::string message;
};

// Runs `fn`, labelling any failure with `stage`.
template <typename F>
auto staged(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError{stage, e.what()};
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool with_config) {
  if (with_config) app->add_option("--config", c.config, "experiment config (JSON)")->required();
  app->add_option("--seed", c.seed, "run seed, overrides the config");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory");
}

// --out, then HANDXFER_OUT, then the config, then runs/<command>.
std::string output_dir(const Common& c, const std::string& from_config, const std::string& command) {
  std::string dir = c.out;
  if (dir.empty()) {
    if (const char* env = std::getenv("HANDXFER_OUT"); env != nullptr && *env != '\0') dir = env;
  }
  if (dir.empty()) dir = from_config;
  if (dir.empty()) dir = (fs::path("runs") / command).string();
  fs::create_directories(dir);
  return dir;
}

class Manifest {
 public:
  Manifest(std::string dir, std::string command) : dir_(std::move(dir)) {
    doc_ = {{"command", std::move(command)}, {"files", Json::array()}};
  }
  Json& doc() { return doc_; }

  void write(const std::string& name, const std::string& contents, Json extra = Json::object()) {
    const std::string path = (fs::path(dir_) / name).string();
    json_io::write_file(path, contents);
    extra["path"] = name;
    extra["fnv1a64"] = file_hash(path);
    doc_["files"].push_back(std::move(extra));
  }
  void finish() { json_io::write_file((fs::path(dir_) / "manifest.json").string(), json_io::dump(doc_)); }

 private:
  std::string dir_;
  Json doc_;
};

std::string numbered(const std::string& prefix, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d.json", prefix.c_str(), i);
  return buf;
}

struct Loaded {
  ExperimentConfig cfg;
  KinematicChain chain;
  RetargetConfig retarget;
};

Loaded load(const Common& c) {
  return staged("config", [&] {
    ExperimentConfig cfg = load_experiment(c.config, c.seed);
    KinematicChain chain = load_chain(cfg.chain);
    Loaded l{std::move(cfg), std::move(chain), {}};
    l.retarget = l.cfg.retarget.empty()
                     ? default_retarget_config(l.chain)
                     : retarget_config_from_json(l.cfg.retarget, l.chain, "retarget");
    l.cfg.retarget = to_json(l.retarget);
    return l;
  });
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string spec;
  int count = 1;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (!a.common.seed) throw StageError{"config", "--seed is required"};
  const std::uint64_t seed = *a.common.seed;
  struct Spec {
    KinematicChain chain;
    SynthSpec synth;
    std::string chain_path;
  };
  const Spec spec = staged("config", [&] {
    const Json j = json_io::parse(json_io::read_file(a.spec));
    json_io::ObjectReader r(j, "");
    fs::path chain_path(r.string("chain"));
    if (chain_path.is_relative()) {
      chain_path = fs::absolute(fs::path(a.spec)).parent_path() / chain_path;
    }
    Spec s{load_chain(chain_path.lexically_normal().string()), SynthSpec{},
           chain_path.lexically_normal().string()};
    if (r.has("synth")) s.synth = synth_spec_from_json(r.required("synth"), SynthSpec{}, "synth");
    r.finish();
    if (a.count < 1) throw ConfigError("count: must be at least 1");
    return s;
  });
  const std::string dir = output_dir(a.common, "", "synth");
  Manifest m(dir, "synth");
  m.doc()["seed"] = seed;
  m.doc()["count"] = a.count;
  m.doc()["spec"] = {{"chain", spec.chain_path}, {"synth", to_json(spec.synth)}};
  staged("synth", [&] {
    for (int i = 0; i < a.count; ++i) {
      const SynthResult r = synth_demo(spec.chain, spec.synth, substream_seed(seed, "synth", i));
      if (i == 0) m.write("object_" + r.object.id + ".json", serialize_object_model(r.object));
      m.write(numbered("demo", i), serialize_trajectory(r.demo),
              {{"seed", substream_seed(seed, "synth", i)}});
    }
  });
  m.finish();
  out << "wrote " << a.count << " demos to " << dir << "\n";
  return 0;
}

struct AugmentArgs {
  Common common;
  std::string demo;
  std::string workspace;
  int count = 1;
};

int cmd_augment(const AugmentArgs& a, std::ostream& out) {
  if (!a.common.seed) throw StageError{"config", "--seed is required"};
  const std::uint64_t seed = *a.common.seed;
  const DemoTrajectory demo = staged("io", [&] { return load_trajectory(a.demo); });
  const Workspace ws = staged("config", [&] {
    return workspace_from_json(json_io::parse(json_io::read_file(a.workspace)), "workspace");
  });
  const auto augs = staged("augment", [&] {
    return sample_augmentations(demo, a.count, ws, substream_seed(seed, "augment"));
  });
  const std::string dir = output_dir(a.common, "", "augment");
  Manifest m(dir, "augment");
  m.doc()["seed"] = seed;
  m.doc()["source"] = fs::absolute(a.demo).lexically_normal().string();
  m.doc()["workspace"] = to_json(ws);
  staged("augment", [&] {
    for (std::size_t i = 0; i < augs.size(); ++i) {
      validate(augs[i].trajectory);
      const auto& t = augs[i].transform;
      m.write(numbered("aug", static_cast<int>(i)), serialize_trajectory(augs[i].trajectory),
              {{"yaw", t.yaw}, {"translation", json_io::to_json(t.translation)}});
    }
  });
  m.finish();
  out << "wrote " << augs.size() << " augmented demos to " << dir << "\n";
  return 0;
}

struct RetargetArgs {
  Common common;
  std::vector<std::string> demos;
  std::string method = "position";
};

int cmd_retarget(const RetargetArgs& a, std::ostream& out) {
  const Loaded l = load(a.common);
  const RetargetMethod method = staged("config", [&] { return parse_retarget_method(a.method); });
  std::vector<DemoTrajectory> demos = staged("io", [&] {
    std::vector<DemoTrajectory> d;
    for (const auto& p : a.demos) d.push_back(load_trajectory(p));
    return d;
  });
  const JointConfig q0 = l.chain.clamp_to_limits(JointConfig::Zero(l.chain.dof()));
  std::vector<JointTrajectory> results(demos.size());
  staged("retarget", [&] {
    parallel_for(demos.size(), a.common.jobs, [&](std::size_t i) {
      try {
        results[i] = run_retargeter(method, l.chain, l.retarget, demos[i], q0);
      } catch (const Error& e) {
        throw Error(a.demos[i] + ": " + e.what());
      }
    });
  });
  const std::string dir = output_dir(a.common, l.cfg.out, "retarget");
  Manifest m(dir, "retarget");
  m.doc()["method"] = retarget_method_name(method);
  m.doc()["config"] = to_json(l.cfg);
  Json report = {{"method", retarget_method_name(method)}, {"demos", Json::array()}};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& jt = results[i];
    double max_r = 0.0;
    double sum_r = 0.0;
    int converged = 0;
    for (std::size_t t = 0; t < jt.size(); ++t) {
      max_r = std::max(max_r, jt.residuals[t]);
      sum_r += jt.residuals[t];
      converged += jt.converged[t] ? 1 : 0;
    }
    const std::string stem = fs::path(a.demos[i]).stem().string();
    const std::string name = stem + "." + retarget_method_name(method) + ".json";
    m.write(name, serialize_joint_trajectory(jt, l.retarget));
    const double n = static_cast<double>(jt.size());
    report["demos"].push_back({{"demo", stem},
                               {"trajectory", name},
                               {"frames", jt.size()},
                               {"max_residual", max_r},
                               {"mean_residual", n > 0 ? sum_r / n : 0.0},
                               {"converged_fraction", n > 0 ? converged / n : 0.0}});
  }
  m.write("report.json", json_io::dump(report));
  m.finish();
  out << "retargeted " << results.size() << " demos with " << retarget_method_name(method)
      << " into " << dir << "\n";
  return 0;
}

int cmd_train(const Common& c, std::ostream& out) {
  const Loaded l = load(c);
  const auto& cfg = l.cfg;
  const auto tasks = staged("tasks", [&] { return load_tasks(l.chain, cfg.train.tasks, cfg.seed, "train"); });
  const auto validation = staged("tasks", [&] {
    return cfg.train.validation ? load_tasks(l.chain, *cfg.train.validation, cfg.seed, "validation")
                                : std::vector<Task>{};
  });
  const std::string dir = output_dir(c, cfg.out, "train");
  json_io::write_file((fs::path(dir) / "config.json").string(), json_io::dump(to_json(cfg)));

  TrainSettings s;
  s.policy = cfg.policy;
  s.env = cfg.env;
  s.reward = cfg.reward;
  s.retarget = l.retarget;
  s.augment_workspace = cfg.train.augment_workspace;
  s.total_steps = cfg.train.steps;
  s.eval_every = cfg.train.eval_every;
  s.eval_seeds = cfg.train.eval_seeds;
  s.jobs = c.jobs;
  const TrainResult r = staged("train", [&] {
    return train(l.chain, tasks, validation, s, cfg.seed, [&](const CurveRow& row) {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "step %ld  reward %.4f  SR_Grasp %.3f  SR_Follow %.3f  E_p %.4f\n", row.step,
                    row.mean_reward, row.sr_grasp, row.sr_follow, row.e_p);
      out << line << std::flush;
    });
  });

  EnvConfig env = cfg.env;
  RewardParams reward = cfg.reward;
  apply_ablations(cfg.policy.ablations, env, reward);
  Manifest m(dir, "train");
  m.doc()["seed"] = cfg.seed;
  m.doc()["steps"] = r.steps;
  staged("write", [&] {
    json_io::write_file((fs::path(dir) / "config.json").string(), json_io::dump(to_json(cfg)));
    m.write("curve.csv", curve_csv(r.curve));
    m.write("checkpoint_initial.json", serialize_checkpoint(r.initial, env, reward));
    if (r.steps > 0) {
      m.write("checkpoint_final.json", serialize_checkpoint(r.final_policy, env, reward));
      m.write("checkpoint_best.json", serialize_checkpoint(r.best, env, reward));
    }
    m.finish();
  });
  out << "trained " << r.steps << " steps; outputs in " << dir << "\n";
  return 0;
}

// Evaluation actors; checkpoints own their policies.
struct ActorSet {
  std::vector<std::unique_ptr<ResidualPolicy>> policies;
  std::vector<std::unique_ptr<Actor>> actors;
  std::vector<EvalSettings> settings;
};

void add_checkpoint(ActorSet& set, const Loaded& l, const std::string& path, const EvalSettings& base) {
  Checkpoint ck = parse_checkpoint(json_io::read_file(path));
  EvalSettings s = base;
  apply_ablations(ck.policy.config().ablations, s.env, s.reward);
  const int expected = observation_layout(l.chain.dof(), s.env.horizon).size;
  if (ck.policy.action_size() != l.chain.dof() || ck.policy.observation_size() != expected) {
    throw ConfigError("checkpoint '" + path + "' does not match chain '" + l.chain.name() + "'");
  }
  set.policies.push_back(std::make_unique<ResidualPolicy>(std::move(ck.policy)));
  set.actors.push_back(
      std::make_unique<PolicyActor>(*set.policies.back(), fs::path(path).stem().string()));
  set.settings.push_back(s);
}

EvalSettings eval_settings(const Loaded& l, int jobs) {
  EvalSettings s;
  s.env = l.cfg.env;
  s.reward = l.cfg.reward;
  s.retarget = l.retarget;
  s.seeds = l.cfg.eval.seeds;
  s.jobs = jobs;
  return s;
}

std::vector<EvalReport> run_actors(const ActorSet& set, const Loaded& l,
                                   const std::vector<Task>& tasks) {
  std::map<RetargetMethod, std::vector<PreparedEpisode>> cache;
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < set.actors.size(); ++i) {
    const Actor& actor = *set.actors[i];
    auto it = cache.find(actor.primitive_method());
    if (it == cache.end()) {
      it = cache
               .emplace(actor.primitive_method(),
                        prepare_episodes(l.chain, tasks, set.settings[i], actor.primitive_method()))
               .first;
    }
    reports.push_back(evaluate_prepared(actor, l.chain, it->second, set.settings[i]));
  }
  return reports;
}

struct EvalArgs {
  Common common;
  std::vector<std::string> checkpoints;
  std::vector<std::string> methods;
};

int cmd_eval(const EvalArgs& a, bool comparing, std::ostream& out) {
  const Loaded l = load(a.common);
  const auto tasks = staged("tasks", [&] { return load_tasks(l.chain, l.cfg.eval.tasks, l.cfg.seed, "eval"); });
  const EvalSettings base = eval_settings(l, a.common.jobs);
  ActorSet set;
  staged("config", [&] {
    std::vector<std::string> methods = a.methods;
    if (comparing && methods.empty()) methods = {"position", "vector", "dexpilot"};
    if (!comparing && methods.empty() && a.checkpoints.empty()) methods = {"position"};
    for (const auto& m : methods) {
      set.actors.push_back(std::make_unique<ReplayActor>(parse_retarget_method(m)));
      set.settings.push_back(base);
    }
    for (const auto& p : a.checkpoints) add_checkpoint(set, l, p, base);
    if (!comparing && set.actors.size() != 1) {
      throw ConfigError("eval takes one checkpoint or method; use compare for several");
    }
  });
  const std::string command = comparing ? "compare" : "eval";
  const auto reports = staged(command, [&] { return run_actors(set, l, tasks); });

  const std::string dir = output_dir(a.common, l.cfg.out, command);
  Manifest m(dir, command);
  m.doc()["seed"] = l.cfg.seed;
  staged("write", [&] {
    json_io::write_file((fs::path(dir) / "config.json").string(), json_io::dump(to_json(l.cfg)));
    if (comparing) {
      for (const auto& r : reports) m.write("episodes_" + r.actor + ".csv", episodes_csv(r));
      m.write("comparison.csv", comparison_csv(reports));
      m.write("comparison.txt", comparison_table(reports));
    } else {
      Json rep = report_json(reports[0]);
      const Interval ci = binomial_interval(
          static_cast<int>(std::lround(reports[0].sr_grasp * reports[0].episodes)),
          reports[0].episodes);
      rep["sr_grasp_interval"] = {ci.lo, ci.hi};
      m.write("report.json", json_io::dump(rep));
      m.write("episodes.csv", episodes_csv(reports[0]));
    }
    m.finish();
  });
  out << comparison_table(reports);
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hand demonstration transfer: synthesis, retargeting, residual policy training "
               "and evaluation."};
  app.name(args.empty() ? "handxfer" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic demonstrations");
  add_common(synth_cmd, synth.common, false);
  synth_cmd->add_option("--spec", synth.spec, "synthesis spec (JSON)")->required();
  synth_cmd->add_option("--count", synth.count, "number of demos");

  AugmentArgs augment;
  auto* augment_cmd = app.add_subcommand("augment", "relocate a demo across a workspace");
  add_common(augment_cmd, augment.common, false);
  augment_cmd->add_option("--demo", augment.demo, "demo file")->required();
  augment_cmd->add_option("--workspace", augment.workspace, "workspace (JSON)")->required();
  augment_cmd->add_option("--count", augment.count, "number of copies");

  RetargetArgs retarget;
  auto* retarget_cmd = app.add_subcommand("retarget", "retarget demos onto the robot chain");
  add_common(retarget_cmd, retarget.common, true);
  retarget_cmd->add_option("--demo", retarget.demos, "demo file(s)")->required();
  retarget_cmd->add_option("--method", retarget.method, "position, vector or dexpilot");

  Common train_args;
  auto* train_cmd = app.add_subcommand("train", "train a residual policy");
  add_common(train_cmd, train_args, true);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or a retargeting baseline");
  add_common(eval_cmd, eval.common, true);
  eval_cmd->add_option("--checkpoint", eval.checkpoints, "policy checkpoint");
  eval_cmd->add_option("--method", eval.methods, "baseline retargeter");

  EvalArgs compare;
  auto* compare_cmd = app.add_subcommand("compare", "compare checkpoints and baselines");
  add_common(compare_cmd, compare.common, true);
  compare_cmd->add_option("--checkpoint", compare.checkpoints, "policy checkpoint(s)");
  compare_cmd->add_option("--methods", compare.methods, "baseline retargeters")->delimiter(',');

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*augment_cmd) return cmd_augment(augment, out);
    if (*retarget_cmd) return cmd_retarget(retarget, out);
    if (*train_cmd) return cmd_train(train_args, out);
    if (*eval_cmd) return cmd_eval(eval, false, out);
    if (*compare_cmd) return cmd_eval(compare, true, out);
  } catch (const StageError& e) {
    err << e.stage << ": " << one_line(e.message) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "io: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 1;
}

}  // namespace handxfer::cli
