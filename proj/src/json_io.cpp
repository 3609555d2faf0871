#include "handxfer/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "handxfer/error.hpp"

namespace handxfer::json_io {

namespace {

void line_column(const std::string& text, std::size_t byte, std::size_t& line,
                 std::size_t& column) {
  line = 1;
  column = 1;
  const std::size_t end = std::min(byte, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

}  // namespace

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 0;
    std::size_t column = 0;
    line_column(text, e.byte == 0 ? 0 : e.byte - 1, line, column);
    std::string msg = e.what();
    // Strip the library prefix, keep the diagnosis.
    if (auto pos = msg.find("syntax error"); pos != std::string::npos) {
      msg = msg.substr(pos);
    }
    throw ParseError(msg, line, column);
  } catch (const Json::out_of_range& e) {
    throw Error(std::string("number out of range: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw Error("write to '" + path + "' failed");
}

std::string dump(const Json& j) { return j.dump(1) + "\n"; }

ObjectReader::ObjectReader(const Json& j, std::string path)
    : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw SchemaError(path_, "expected an object");
}

bool ObjectReader::has(const std::string& key) const { return j_.contains(key); }

std::string ObjectReader::child_path(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

const Json& ObjectReader::required(const std::string& key) {
  auto it = j_.find(key);
  if (it == j_.end()) throw SchemaError(child_path(key), "missing field");
  seen_.insert(key);
  return *it;
}

const Json* ObjectReader::optional(const std::string& key) {
  auto it = j_.find(key);
  if (it == j_.end()) return nullptr;
  seen_.insert(key);
  return &*it;
}

std::string ObjectReader::string(const std::string& key) {
  const Json& v = required(key);
  if (!v.is_string()) throw SchemaError(child_path(key), "expected a string");
  return v.get<std::string>();
}

double ObjectReader::number(const std::string& key) {
  return as_number(required(key), child_path(key));
}

long long ObjectReader::integer(const std::string& key) {
  const Json& v = required(key);
  if (!v.is_number_integer()) {
    throw SchemaError(child_path(key), "expected an integer");
  }
  return v.get<long long>();
}

bool ObjectReader::boolean(const std::string& key) {
  const Json& v = required(key);
  if (!v.is_boolean()) throw SchemaError(child_path(key), "expected a boolean");
  return v.get<bool>();
}

void ObjectReader::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it) {
    if (!seen_.contains(it.key())) {
      throw SchemaError(child_path(it.key()), "unknown field");
    }
  }
}

double as_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "non-finite value");
  return v;
}

std::vector<double> as_numbers(const Json& j, const std::string& path,
                               std::size_t expected_size) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  if (j.size() != expected_size) {
    throw SchemaError(path, "expected " + std::to_string(expected_size) +
                                " values, got " + std::to_string(j.size()));
  }
  std::vector<double> out;
  out.reserve(expected_size);
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Vec3 as_vec3(const Json& j, const std::string& path) {
  const auto v = as_numbers(j, path, 3);
  return {v[0], v[1], v[2]};
}

RigidTransform as_pose(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  const Vec3 t = as_vec3(r.required("xyz"), r.child_path("xyz"));
  const auto q = as_numbers(r.required("wxyz"), r.child_path("wxyz"), 4);
  r.finish();
  const Quat quat(q[0], q[1], q[2], q[3]);
  if (quat.norm() < 1e-9) throw SchemaError(path + ".wxyz", "zero quaternion");
  return {quat, t};
}

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const RigidTransform& t) {
  const Quat& q = t.rotation();
  return Json{{"xyz", to_json(t.translation())},
              {"wxyz", Json::array({q.w(), q.x(), q.y(), q.z()})}};
}

}  // namespace handxfer::json_io
