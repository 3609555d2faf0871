#include "handxfer/suite.hpp"

#include <cmath>

#include "handxfer/error.hpp"
#include "handxfer/json_io.hpp"
#include "handxfer/random.hpp"

namespace handxfer {

namespace {

using Json = nlohmann::json;

Json shape_json(const ObjectShape& s) {
  return {{"kind", shape_kind_name(s.kind)}, {"size", json_io::to_json(s.size)}};
}

ObjectShape shape_from_json(const Json& j, const std::string& path) {
  json_io::ObjectReader r(j, path);
  ObjectShape s;
  s.kind = parse_shape_kind(r.string("kind"));
  s.size = json_io::as_vec3(r.required("size"), r.child_path("size"));
  r.finish();
  if ((s.size.array() <= 0.0).any()) throw ConfigError(path + ".size: must be positive");
  return s;
}

Json xy_json(const Eigen::Vector2d& v) { return Json::array({v.x(), v.y()}); }

Eigen::Vector2d xy_from_json(const Json& j, const std::string& path) {
  const auto v = json_io::as_numbers(j, path, 2);
  return {v[0], v[1]};
}

}  // namespace

SuiteConfig default_suite_config() {
  SuiteConfig cfg;
  ObjectShape sphere;
  sphere.kind = ObjectShape::Kind::kSphere;
  sphere.size = Vec3(0.035, 0.035, 0.035);
  ObjectShape cube;
  cube.kind = ObjectShape::Kind::kBox;
  cube.size = Vec3(0.03, 0.03, 0.035);
  ObjectShape cylinder;
  cylinder.kind = ObjectShape::Kind::kCylinder;
  cylinder.size = Vec3(0.033, 0.033, 0.045);
  cfg.shapes = {{"sphere", sphere}, {"cube", cube}, {"cylinder", cylinder}};
  return cfg;
}

void validate(const SuiteConfig& cfg) {
  if (cfg.shapes.empty()) throw ConfigError("suite.shapes: must not be empty");
  for (std::size_t i = 0; i < cfg.shapes.size(); ++i) {
    if (cfg.shapes[i].name.empty()) {
      throw ConfigError("suite.shapes[" + std::to_string(i) + "].name: must not be empty");
    }
  }
  if (cfg.demos_per_shape < 1) throw ConfigError("suite.demos_per_shape: must be positive");
  if (!(cfg.xy_min.array() <= cfg.xy_max.array()).all()) {
    throw ConfigError("suite.xy_min: must not exceed xy_max");
  }
  if (!(cfg.yaw_min <= cfg.yaw_max)) throw ConfigError("suite.yaw_min: must not exceed yaw_max");
}

Json to_json(const SynthSpec& s) {
  return {{"shape", shape_json(s.shape)},
          {"object_id", s.object_id},
          {"object_xy", xy_json(s.object_xy)},
          {"object_yaw", s.object_yaw},
          {"hand_yaw", s.hand_yaw},
          {"reach_frames", s.reach_frames},
          {"close_frames", s.close_frames},
          {"lift_frames", s.lift_frames},
          {"follow_frames", s.follow_frames},
          {"lift_height", s.lift_height},
          {"approach_height", s.approach_height},
          {"approach_offset", s.approach_offset},
          {"hand_yaw_jitter", s.hand_yaw_jitter},
          {"follow_distance", s.follow_distance},
          {"follow_yaw", s.follow_yaw},
          {"palm_clearance", s.palm_clearance},
          {"open_angle", s.open_angle},
          {"flex_ratio", s.flex_ratio},
          {"pad_offset", s.pad_offset},
          {"alpha", s.alpha},
          {"dt", s.dt},
          {"reach_radius", s.reach_radius},
          {"joint_step_cap", s.joint_step_cap},
          {"max_wrist_step", s.max_wrist_step},
          {"lift_threshold", s.lift_threshold},
          {"object_points", s.object_points}};
}

SynthSpec synth_spec_from_json(const Json& j, const SynthSpec& base, const std::string& path) {
  SynthSpec s = base;
  json_io::ObjectReader r(j, path);
  auto num = [&](const char* key, double& field) {
    if (r.has(key)) field = r.number(key);
  };
  auto integer = [&](const char* key, int& field) {
    if (r.has(key)) field = static_cast<int>(r.integer(key));
  };
  if (r.has("shape")) s.shape = shape_from_json(r.required("shape"), r.child_path("shape"));
  if (r.has("object_id")) s.object_id = r.string("object_id");
  if (r.has("object_xy")) {
    s.object_xy = xy_from_json(r.required("object_xy"), r.child_path("object_xy"));
  }
  num("object_yaw", s.object_yaw);
  num("hand_yaw", s.hand_yaw);
  integer("reach_frames", s.reach_frames);
  integer("close_frames", s.close_frames);
  integer("lift_frames", s.lift_frames);
  integer("follow_frames", s.follow_frames);
  num("lift_height", s.lift_height);
  num("approach_height", s.approach_height);
  num("approach_offset", s.approach_offset);
  num("hand_yaw_jitter", s.hand_yaw_jitter);
  num("follow_distance", s.follow_distance);
  num("follow_yaw", s.follow_yaw);
  num("palm_clearance", s.palm_clearance);
  num("open_angle", s.open_angle);
  num("flex_ratio", s.flex_ratio);
  num("pad_offset", s.pad_offset);
  num("alpha", s.alpha);
  num("dt", s.dt);
  num("reach_radius", s.reach_radius);
  num("joint_step_cap", s.joint_step_cap);
  num("max_wrist_step", s.max_wrist_step);
  num("lift_threshold", s.lift_threshold);
  integer("object_points", s.object_points);
  r.finish();
  return s;
}

Json to_json(const Workspace& w) {
  return {{"min", json_io::to_json(w.min)},
          {"max", json_io::to_json(w.max)},
          {"yaw_min", w.yaw_min},
          {"yaw_max", w.yaw_max}};
}

Workspace workspace_from_json(const Json& j, const std::string& path) {
  json_io::ObjectReader r(j, path);
  Workspace w;
  w.min = json_io::as_vec3(r.required("min"), r.child_path("min"));
  w.max = json_io::as_vec3(r.required("max"), r.child_path("max"));
  w.yaw_min = r.number("yaw_min");
  w.yaw_max = r.number("yaw_max");
  r.finish();
  for (int a = 0; a < 3; ++a) {
    if (!(w.min[a] <= w.max[a])) throw ConfigError(path + ".min: exceeds max");
  }
  if (!(w.yaw_min <= w.yaw_max)) throw ConfigError(path + ".yaw_min: exceeds yaw_max");
  return w;
}

Json to_json(const SuiteConfig& cfg) {
  Json shapes = Json::array();
  for (const auto& s : cfg.shapes) {
    Json e = shape_json(s.shape);
    e["name"] = s.name;
    shapes.push_back(e);
  }
  return {{"shapes", shapes},
          {"demos_per_shape", cfg.demos_per_shape},
          {"xy_min", xy_json(cfg.xy_min)},
          {"xy_max", xy_json(cfg.xy_max)},
          {"yaw_min", cfg.yaw_min},
          {"yaw_max", cfg.yaw_max},
          {"synth", to_json(cfg.base)}};
}

SuiteConfig suite_config_from_json(const Json& j, const std::string& path) {
  SuiteConfig cfg = default_suite_config();
  json_io::ObjectReader r(j, path);
  if (r.has("shapes")) {
    const Json& arr = r.required("shapes");
    if (!arr.is_array()) throw SchemaError(r.child_path("shapes"), "expected an array");
    cfg.shapes.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = r.child_path("shapes") + "[" + std::to_string(i) + "]";
      if (!arr[i].is_object()) throw SchemaError(p, "expected an object");
      Json shape = arr[i];
      if (!shape.contains("name")) throw SchemaError(p + ".name", "missing required field");
      SuiteShape s;
      s.name = shape["name"].is_string() ? shape["name"].get<std::string>() : "";
      shape.erase("name");
      s.shape = shape_from_json(shape, p);
      cfg.shapes.push_back(s);
    }
  }
  if (r.has("demos_per_shape")) cfg.demos_per_shape = static_cast<int>(r.integer("demos_per_shape"));
  if (r.has("xy_min")) cfg.xy_min = xy_from_json(r.required("xy_min"), r.child_path("xy_min"));
  if (r.has("xy_max")) cfg.xy_max = xy_from_json(r.required("xy_max"), r.child_path("xy_max"));
  if (r.has("yaw_min")) cfg.yaw_min = r.number("yaw_min");
  if (r.has("yaw_max")) cfg.yaw_max = r.number("yaw_max");
  if (r.has("synth")) {
    cfg.base = synth_spec_from_json(r.required("synth"), cfg.base, r.child_path("synth"));
  }
  r.finish();
  validate(cfg);
  return cfg;
}

std::vector<Task> make_suite(const KinematicChain& chain, const SuiteConfig& cfg,
                             std::uint64_t seed) {
  validate(cfg);
  std::vector<Task> tasks;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 0; s < cfg.shapes.size(); ++s) {
    std::shared_ptr<const ObjectModel> object;
    for (int d = 0; d < cfg.demos_per_shape; ++d) {
      const std::uint64_t index = s * 100000 + static_cast<std::uint64_t>(d);
      Rng rng = make_rng(seed, "suite", index);
      SynthSpec spec = cfg.base;
      spec.shape = cfg.shapes[s].shape;
      spec.object_id = cfg.shapes[s].name;
      const double ux = unit(rng);
      const double uy = unit(rng);
      spec.object_xy = cfg.xy_min + Eigen::Vector2d(ux, uy).cwiseProduct(cfg.xy_max - cfg.xy_min);
      spec.object_yaw = cfg.yaw_min + unit(rng) * (cfg.yaw_max - cfg.yaw_min);
      SynthResult result;
      try {
        result = synth_demo(chain, spec, substream_seed(seed, "synth", index));
      } catch (const Error& e) {
        throw ConfigError("suite: shape '" + cfg.shapes[s].name + "' demo " +
                          std::to_string(d) + ": " + e.what());
      }
      if (!object) object = std::make_shared<const ObjectModel>(std::move(result.object));
      Task task;
      task.name = cfg.shapes[s].name + "_" + std::to_string(d);
      task.demo = std::make_shared<const DemoTrajectory>(std::move(result.demo));
      task.object = object;
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

std::vector<Task> relocate_tasks(const std::vector<Task>& tasks, const Workspace& workspace,
                                 std::uint64_t seed) {
  std::vector<Task> out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    Rng rng = make_rng(seed, "relocate", i);
    const Vec3 start = tasks[i].demo->frames.front().object_pose.translation();
    WorkspaceTransform t;
    t.yaw = workspace.yaw_min + unit(rng) * (workspace.yaw_max - workspace.yaw_min);
    Vec3 target = start;
    for (int a = 0; a < 2; ++a) {
      target[a] = workspace.min[a] + unit(rng) * (workspace.max[a] - workspace.min[a]);
    }
    // Rotate about the object's own vertical axis, keep its height.
    t.translation = target - t.to_rigid().rotate(start);
    t.translation.z() = 0.0;
    Task moved = tasks[i];
    moved.demo = std::make_shared<const DemoTrajectory>(augment(*tasks[i].demo, t));
    out.push_back(std::move(moved));
  }
  return out;
}

}  // namespace handxfer
