#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "handxfer/error.hpp"
#include "handxfer/eval.hpp"
#include "support/oracles.hpp"

using namespace handxfer;

namespace {

const KinematicChain& toy_hand() {
  static const KinematicChain chain =
      load_chain(handxfer::testing::data_path("chains/toy_hand.json"));
  return chain;
}

const std::vector<Task>& tasks() {
  static const std::vector<Task> t = [] {
    SuiteConfig cfg = default_suite_config();
    cfg.demos_per_shape = 2;
    return make_suite(toy_hand(), cfg, 21);
  }();
  return t;
}

const DemoTrajectory& demo() { return *tasks().front().demo; }

// Trace that carries the object exactly along the demo, offset by `offset`,
// attached from one frame before the lift.
EpisodeTrace carried_trace(const Vec3& offset) {
  EpisodeTrace trace;
  const int lift = *demo().lift_index;
  for (int t = 0; t < static_cast<int>(demo().size()); ++t) {
    TraceFrame f;
    f.t = t;
    const auto& pose = demo().frames[t].object_pose;
    f.object_pose = RigidTransform(pose.rotation(), pose.translation() + offset);
    f.attached = t >= lift - 1;
    trace.frames.push_back(f);
  }
  return trace;
}

EvalSettings settings(std::vector<std::uint64_t> seeds) {
  EvalSettings s;
  s.retarget = default_retarget_config(toy_hand());
  s.seeds = std::move(seeds);
  return s;
}

class StillActor : public Actor {
 public:
  std::string name() const override { return "still"; }
  JointConfig act(const GraspEnv& env, const Eigen::VectorXd&) const override {
    return JointConfig::Zero(env.chain().dof());
  }
};

}  // namespace

TEST(EvalJudge, NoAttachmentIsNoGrasp) {
  EpisodeTrace trace = carried_trace(Vec3::Zero());
  for (auto& f : trace.frames) f.attached = false;
  const auto out = judge_episode(trace, demo(), EnvConfig{}, RewardParams{});
  EXPECT_FALSE(out.grasped);
  EXPECT_FALSE(out.followed);
}

TEST(EvalJudge, PerfectCarryHasZeroError) {
  const auto out = judge_episode(carried_trace(Vec3::Zero()), demo(), EnvConfig{}, RewardParams{});
  EXPECT_TRUE(out.grasped);
  EXPECT_TRUE(out.followed);
  const int t0 = switch_time(demo(), RewardParams{});
  EXPECT_EQ(out.position_errors.size(), demo().size() - static_cast<std::size_t>(t0));
  for (double e : out.position_errors) EXPECT_EQ(e, 0.0);
  for (double e : out.rotation_errors) EXPECT_NEAR(e, 0.0, 1e-7);
}

TEST(EvalJudge, ConstantOffsetGivesThatError) {
  const auto out =
      judge_episode(carried_trace(Vec3(0.03, 0.0, 0.0)), demo(), EnvConfig{}, RewardParams{});
  EXPECT_TRUE(out.followed);
  for (double e : out.position_errors) EXPECT_NEAR(e, 0.03, 1e-12);
  EvalReport r = summarize("offset", {EpisodeRecord{"a", "sphere", 1, out, 0.0}});
  EXPECT_NEAR(r.e_p, 0.03, 1e-12);
  EXPECT_EQ(r.sr_follow, 1.0);
}

TEST(EvalJudge, DetachOrDepartureIsNotFollow) {
  EpisodeTrace detached = carried_trace(Vec3::Zero());
  detached.frames[*demo().lift_index + 3].attached = false;
  auto out = judge_episode(detached, demo(), EnvConfig{}, RewardParams{});
  EXPECT_TRUE(out.grasped);
  EXPECT_FALSE(out.followed);

  EnvConfig env;
  const auto far = judge_episode(carried_trace(Vec3(0.0, env.drop_distance + 0.01, 0.0)), demo(),
                                 env, RewardParams{});
  EXPECT_TRUE(far.grasped);
  EXPECT_FALSE(far.followed);
}

TEST(EvalJudge, MalformedTracesThrow) {
  EpisodeTrace truncated = carried_trace(Vec3::Zero());
  truncated.frames.resize(truncated.frames.size() - 2);
  EXPECT_THROW(judge_episode(truncated, demo(), EnvConfig{}, RewardParams{}), SemanticError);
  truncated.frames.back().info.drop = true;
  EXPECT_NO_THROW(judge_episode(truncated, demo(), EnvConfig{}, RewardParams{}));

  EpisodeTrace gap = carried_trace(Vec3::Zero());
  gap.frames.erase(gap.frames.begin() + 3);
  EXPECT_THROW(judge_episode(gap, demo(), EnvConfig{}, RewardParams{}), SemanticError);
  EXPECT_THROW(judge_episode(EpisodeTrace{}, demo(), EnvConfig{}, RewardParams{}), SemanticError);
}

TEST(EvalRun, NoiselessReplaySucceeds) {
  EvalSettings s = settings({1});
  s.env.detection_noise = 0.0;
  const std::vector<Task> one = {tasks().front()};
  const auto r = evaluate(ReplayActor(RetargetMethod::kPosition), toy_hand(), one, s);
  EXPECT_EQ(r.episodes, 1);
  EXPECT_EQ(r.sr_grasp, 1.0);
  EXPECT_EQ(r.sr_follow, 1.0);
}

TEST(EvalRun, StillHandNeverGrasps) {
  const auto r = evaluate(StillActor(), toy_hand(), tasks(), settings({1}));
  EXPECT_EQ(r.episodes, static_cast<int>(tasks().size()));
  EXPECT_EQ(r.sr_grasp, 0.0);
  EXPECT_EQ(r.sr_follow, 0.0);
  EXPECT_EQ(r.e_p, 0.0);
}

TEST(EvalRun, RepeatableAndJobIndependent) {
  const ReplayActor actor(RetargetMethod::kPosition);
  EvalSettings s = settings({1, 2});
  const auto a = evaluate(actor, toy_hand(), tasks(), s);
  const auto b = evaluate(actor, toy_hand(), tasks(), s);
  s.jobs = 3;
  const auto c = evaluate(actor, toy_hand(), tasks(), s);
  EXPECT_EQ(episodes_csv(a), episodes_csv(b));
  EXPECT_EQ(episodes_csv(a), episodes_csv(c));
  EXPECT_EQ(report_json(a).dump(), report_json(c).dump());
  EXPECT_EQ(a.episodes, 2 * static_cast<int>(tasks().size()));
  std::set<std::uint64_t> seeds;
  for (const auto& rec : a.records) seeds.insert(rec.seed);
  EXPECT_EQ(seeds.size(), a.records.size());
}

TEST(EvalRun, FollowNeverExceedsGrasp) {
  const ReplayActor pos(RetargetMethod::kPosition);
  const ReplayActor vec(RetargetMethod::kVector);
  const ReplayActor dex(RetargetMethod::kDexPilot);
  const auto reports = compare({&pos, &vec, &dex}, toy_hand(), tasks(), settings({3}));
  ASSERT_EQ(reports.size(), 3u);
  for (const auto& r : reports) {
    EXPECT_LE(r.sr_follow, r.sr_grasp);
    for (const auto& rec : r.records) EXPECT_TRUE(!rec.outcome.followed || rec.outcome.grasped);
    for (const auto& [name, stats] : r.per_object) EXPECT_LE(stats.sr_follow, stats.sr_grasp);
  }
  EXPECT_EQ(reports[1].actor, "vector");
  const std::string csv = comparison_csv(reports);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,episodes,sr_grasp,sr_follow,e_p,e_r");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(EvalRun, DisjointSeedSetsAgreeWithinIntervals) {
  const ReplayActor actor(RetargetMethod::kPosition);
  const auto a = evaluate(actor, toy_hand(), tasks(), settings({1, 2, 3}));
  const auto b = evaluate(actor, toy_hand(), tasks(), settings({4, 5, 6}));
  const auto ia = binomial_interval(static_cast<int>(std::lround(a.sr_grasp * a.episodes)), a.episodes);
  const auto ib = binomial_interval(static_cast<int>(std::lround(b.sr_grasp * b.episodes)), b.episodes);
  EXPECT_LE(std::max(ia.lo, ib.lo), std::min(ia.hi, ib.hi));
}

TEST(EvalSummary, PerObjectAndInterval) {
  EpisodeOutcome hit;
  hit.grasped = hit.followed = true;
  hit.position_errors = {0.01, 0.03};
  hit.rotation_errors = {0.1, 0.1};
  EpisodeOutcome grasp_only;
  grasp_only.grasped = true;
  const EvalReport r = summarize("x", {{"s0", "sphere", 1, hit, 1.0},
                                       {"s1", "sphere", 2, grasp_only, 0.5},
                                       {"c0", "cube", 3, EpisodeOutcome{}, 0.0}});
  EXPECT_EQ(r.episodes, 3);
  EXPECT_NEAR(r.sr_grasp, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.sr_follow, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.e_p, 0.02, 1e-15);
  EXPECT_NEAR(r.e_r, 0.1, 1e-15);
  EXPECT_EQ(r.per_object.at("sphere").episodes, 2);
  EXPECT_EQ(r.per_object.at("sphere").sr_grasp, 1.0);
  EXPECT_EQ(r.per_object.at("cube").sr_grasp, 0.0);

  // Wilson interval for 5 of 10 at z = 1.96.
  const Interval i = binomial_interval(5, 10);
  EXPECT_NEAR(i.lo, 0.2365896, 1e-6);
  EXPECT_NEAR(i.hi, 0.7634104, 1e-6);
  EXPECT_EQ(binomial_interval(0, 10).lo, 0.0);
  EXPECT_EQ(binomial_interval(10, 10).hi, 1.0);
  EXPECT_EQ(episodes_csv(r).substr(0, 48), "task,object,seed,grasped,followed,e_p,e_r,reward");
}

TEST(Suite, LayoutAndDeterminism) {
  SuiteConfig cfg = default_suite_config();
  cfg.demos_per_shape = 2;
  const auto again = make_suite(toy_hand(), cfg, 21);
  ASSERT_EQ(again.size(), 6u);
  EXPECT_EQ(again[0].name, "sphere_0");
  EXPECT_EQ(again[3].name, "cube_1");
  EXPECT_EQ(again[0].object, again[1].object);
  EXPECT_NE(again[0].object, again[2].object);
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(serialize_trajectory(*again[i].demo), serialize_trajectory(*tasks()[i].demo));
    const Vec3 p = again[i].demo->frames.front().object_pose.translation();
    EXPECT_GE(p.x(), cfg.xy_min.x());
    EXPECT_LE(p.x(), cfg.xy_max.x());
    EXPECT_GE(p.y(), cfg.xy_min.y());
    EXPECT_LE(p.y(), cfg.xy_max.y());
    EXPECT_TRUE(again[i].demo->lift_index.has_value());
  }
  const auto other = make_suite(toy_hand(), cfg, 22);
  EXPECT_NE(serialize_trajectory(*other[0].demo), serialize_trajectory(*tasks()[0].demo));
}

TEST(Suite, RelocationMovesIntoWorkspace) {
  Workspace w;
  w.min = Vec3(0.62, -0.1, 0.0);
  w.max = Vec3(0.72, 0.1, 0.0);
  w.yaw_min = -0.4;
  w.yaw_max = 0.4;
  const auto moved = relocate_tasks(tasks(), w, 3);
  ASSERT_EQ(moved.size(), tasks().size());
  for (std::size_t i = 0; i < moved.size(); ++i) {
    const auto& a = *tasks()[i].demo;
    const auto& b = *moved[i].demo;
    const Vec3 start = b.frames.front().object_pose.translation();
    EXPECT_GE(start.x(), 0.62 - 1e-12);
    EXPECT_LE(start.x(), 0.72 + 1e-12);
    EXPECT_NEAR(start.z(), a.frames.front().object_pose.translation().z(), 1e-12);
    for (std::size_t t = 0; t < a.size(); ++t) {
      const double before = (a.frames[t].wrist_pose.translation() -
                             a.frames[t].object_pose.translation()).norm();
      const double after = (b.frames[t].wrist_pose.translation() -
                            b.frames[t].object_pose.translation()).norm();
      EXPECT_NEAR(before, after, 1e-12);
    }
    EXPECT_EQ(moved[i].object, tasks()[i].object);
    EXPECT_EQ(b.lift_index, a.lift_index);
  }
}

TEST(SuiteConfigSchema, RoundTripAndValidation) {
  SuiteConfig cfg = default_suite_config();
  cfg.demos_per_shape = 3;
  const SuiteConfig back = suite_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_THROW(suite_config_from_json({{"demos_per_shape", 0}}), ConfigError);
  EXPECT_THROW(suite_config_from_json({{"shapes", nlohmann::json::array()}}), ConfigError);
  EXPECT_THROW(suite_config_from_json({{"demo_count", 3}}), SchemaError);
}
