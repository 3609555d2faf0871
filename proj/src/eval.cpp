#include "handxfer/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "handxfer/error.hpp"
#include "handxfer/parallel.hpp"
#include "handxfer/random.hpp"

namespace handxfer {

namespace {

using Json = nlohmann::json;

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

EpisodeOutcome judge_episode(const EpisodeTrace& trace, const DemoTrajectory& demo,
                             const EnvConfig& env, const RewardParams& reward) {
  const auto& frames = trace.frames;
  if (frames.empty()) throw SemanticError("trace has no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].t != static_cast<int>(i)) {
      throw SemanticError("trace frame " + std::to_string(i) + " has t = " +
                          std::to_string(frames[i].t));
    }
  }
  const int last = static_cast<int>(demo.size()) - 1;
  const TraceFrame& end = frames.back();
  if (end.t > last) throw SemanticError("trace is longer than its demo");
  if (end.t < last && !end.info.drop) {
    throw SemanticError("trace stops at frame " + std::to_string(end.t) + " of " +
                        std::to_string(last) + " without a drop");
  }
  if (!demo.lift_index) throw SemanticError("demo has no lift_index");

  EpisodeOutcome out;
  const double floor = frames.front().object_pose.translation().z();
  bool attached_ever = false;
  bool rose = false;
  bool detached = false;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    attached_ever |= frames[i].attached;
    rose |= frames[i].object_pose.translation().z() >= floor + env.lift_threshold;
    if (i > 0 && frames[i - 1].attached && !frames[i].attached) detached = true;
  }
  out.grasped = attached_ever && rose;

  bool on_path = end.t == last;
  for (int t = *demo.lift_index; t <= end.t; ++t) {
    const Vec3 gap = frames[t].object_pose.translation() - demo.frames[t].object_pose.translation();
    if (gap.norm() > env.drop_distance) on_path = false;
  }
  out.followed = out.grasped && !detached && on_path;

  const int t0 = switch_time(demo, reward);
  for (int t = t0; t <= end.t; ++t) {
    const auto& pose = frames[t].object_pose;
    const auto& target = demo.frames[t].object_pose;
    out.position_errors.push_back((target.translation() - pose.translation()).norm());
    out.rotation_errors.push_back(geodesic_angle(target.rotation(), pose.rotation()));
  }
  return out;
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t task) {
  return substream_seed(seed, "env", task);
}

EvalReport summarize(const std::string& actor, std::vector<EpisodeRecord> records) {
  EvalReport r;
  r.actor = actor;
  r.episodes = static_cast<int>(records.size());
  int grasped = 0;
  int followed = 0;
  double e_p = 0.0;
  double e_r = 0.0;
  struct Acc {
    int n = 0, grasped = 0, followed = 0;
    double e_p = 0.0, e_r = 0.0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& rec : records) {
    auto& a = acc[rec.object];
    ++a.n;
    if (rec.outcome.grasped) {
      ++grasped;
      ++a.grasped;
    }
    if (rec.outcome.followed) {
      ++followed;
      ++a.followed;
      const double p = mean(rec.outcome.position_errors);
      const double q = mean(rec.outcome.rotation_errors);
      e_p += p;
      e_r += q;
      a.e_p += p;
      a.e_r += q;
    }
  }
  if (r.episodes > 0) {
    r.sr_grasp = static_cast<double>(grasped) / r.episodes;
    r.sr_follow = static_cast<double>(followed) / r.episodes;
  }
  if (followed > 0) {
    r.e_p = e_p / followed;
    r.e_r = e_r / followed;
  }
  for (const auto& [object, a] : acc) {
    ObjectStats s;
    s.episodes = a.n;
    s.sr_grasp = static_cast<double>(a.grasped) / a.n;
    s.sr_follow = static_cast<double>(a.followed) / a.n;
    if (a.followed > 0) {
      s.e_p = a.e_p / a.followed;
      s.e_r = a.e_r / a.followed;
    }
    r.per_object[object] = s;
  }
  r.records = std::move(records);
  return r;
}

std::vector<PreparedEpisode> prepare_episodes(const KinematicChain& chain,
                                              const std::vector<Task>& tasks,
                                              const EvalSettings& settings,
                                              RetargetMethod method) {
  if (tasks.empty()) throw ConfigError("evaluation needs at least one task");
  if (settings.seeds.empty()) throw ConfigError("evaluation needs at least one seed");
  const std::size_t n = tasks.size() * settings.seeds.size();
  std::vector<PreparedEpisode> out(n);
  parallel_for(n, settings.jobs, [&](std::size_t i) {
    const std::size_t s = i / tasks.size();
    const std::size_t k = i % tasks.size();
    const Task& task = tasks[k];
    try {
      out[i].task = task.name;
      out[i].episode = make_episode(chain, settings.env, settings.retarget, method, task.demo,
                                    task.object, episode_seed(settings.seeds[s], k));
    } catch (const Error& e) {
      throw Error("task '" + task.name + "' seed " + std::to_string(settings.seeds[s]) + ": " +
                  e.what());
    }
  });
  return out;
}

EvalReport evaluate_prepared(const Actor& actor, const KinematicChain& chain,
                             const std::vector<PreparedEpisode>& episodes,
                             const EvalSettings& settings) {
  std::vector<EpisodeRecord> records(episodes.size());
  parallel_for(episodes.size(), settings.jobs, [&](std::size_t i) {
    const auto& prepared = episodes[i];
    try {
      GraspEnv env(chain, settings.env, settings.reward);
      Eigen::VectorXd obs = env.reset(prepared.episode);
      double total = 0.0;
      for (;;) {
        const StepResult r = env.step(actor.act(env, obs));
        total += r.reward;
        if (r.done) break;
        obs = env.observe();
      }
      EpisodeRecord& rec = records[i];
      rec.task = prepared.task;
      rec.object = prepared.episode.demo->object_ref;
      rec.seed = prepared.episode.seed;
      rec.total_reward = total;
      rec.outcome =
          judge_episode(env.trace(), *prepared.episode.demo, settings.env, settings.reward);
    } catch (const Error& e) {
      throw Error("task '" + prepared.task + "' episode seed " +
                  std::to_string(prepared.episode.seed) + ": " + e.what());
    }
  });
  return summarize(actor.name(), std::move(records));
}

EvalReport evaluate(const Actor& actor, const KinematicChain& chain,
                    const std::vector<Task>& tasks, const EvalSettings& settings) {
  const auto episodes = prepare_episodes(chain, tasks, settings, actor.primitive_method());
  return evaluate_prepared(actor, chain, episodes, settings);
}

std::vector<EvalReport> compare(const std::vector<const Actor*>& actors,
                                const KinematicChain& chain, const std::vector<Task>& tasks,
                                const EvalSettings& settings) {
  std::map<RetargetMethod, std::vector<PreparedEpisode>> cache;
  std::vector<EvalReport> reports;
  for (const Actor* actor : actors) {
    const RetargetMethod method = actor->primitive_method();
    auto it = cache.find(method);
    if (it == cache.end()) {
      it = cache.emplace(method, prepare_episodes(chain, tasks, settings, method)).first;
    }
    reports.push_back(evaluate_prepared(*actor, chain, it->second, settings));
  }
  return reports;
}

Interval binomial_interval(int successes, int trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = trials;
  const double p = successes / n;
  const double z2 = z * z;
  const double center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::string episodes_csv(const EvalReport& report) {
  std::string out = "task,object,seed,grasped,followed,e_p,e_r,reward\n";
  for (const auto& r : report.records) {
    out += r.task + "," + r.object + "," + std::to_string(r.seed) + "," +
           (r.outcome.grasped ? "1" : "0") + "," + (r.outcome.followed ? "1" : "0") + "," +
           fmt("%.9g", mean(r.outcome.position_errors)) + "," +
           fmt("%.9g", mean(r.outcome.rotation_errors)) + "," + fmt("%.9g", r.total_reward) +
           "\n";
  }
  return out;
}

Json report_json(const EvalReport& r) {
  Json objects = Json::object();
  for (const auto& [name, s] : r.per_object) {
    objects[name] = {{"episodes", s.episodes},
                     {"sr_grasp", s.sr_grasp},
                     {"sr_follow", s.sr_follow},
                     {"e_p", s.e_p},
                     {"e_r", s.e_r}};
  }
  return {{"actor", r.actor},         {"episodes", r.episodes}, {"sr_grasp", r.sr_grasp},
          {"sr_follow", r.sr_follow}, {"e_p", r.e_p},           {"e_r", r.e_r},
          {"per_object", objects}};
}

std::string comparison_csv(const std::vector<EvalReport>& reports) {
  std::string out = "method,episodes,sr_grasp,sr_follow,e_p,e_r\n";
  for (const auto& r : reports) {
    out += r.actor + "," + std::to_string(r.episodes) + "," + fmt("%.9g", r.sr_grasp) + "," +
           fmt("%.9g", r.sr_follow) + "," + fmt("%.9g", r.e_p) + "," + fmt("%.9g", r.e_r) +
           "\n";
  }
  return out;
}

std::string comparison_table(const std::vector<EvalReport>& reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.actor.size());
  auto pad = [&](std::string s) {
    s.resize(width, ' ');
    return s;
  };
  std::string out = pad("method") + "  episodes  SR_Grasp  SR_Follow   E_p (m)  E_r (rad)\n";
  for (const auto& r : reports) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %8d  %8.3f  %9.3f  %8.4f  %9.4f\n", r.episodes,
                  r.sr_grasp, r.sr_follow, r.e_p, r.e_r);
    out += pad(r.actor) + line;
  }
  return out;
}

}  // namespace handxfer
