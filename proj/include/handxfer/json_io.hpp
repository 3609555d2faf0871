#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "handxfer/transform.hpp"

namespace handxfer::json_io {

using Json = nlohmann::json;

// Parses document text; syntax errors become ParseError with line/column.
Json parse(const std::string& text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);
// Pretty-printed dump ending in a newline.
std::string dump(const Json& j);

// Schema-checked view over a JSON object. Every key must be consumed through
// one of the accessors before finish(); leftovers are rejected.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path);

  bool has(const std::string& key) const;
  const Json& required(const std::string& key);
  const Json* optional(const std::string& key);

  std::string string(const std::string& key);
  double number(const std::string& key);  // finite only
  long long integer(const std::string& key);
  bool boolean(const std::string& key);

  std::string child_path(const std::string& key) const;
  const std::string& path() const { return path_; }
  void finish() const;

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_number(const Json& j, const std::string& path);
std::vector<double> as_numbers(const Json& j, const std::string& path,
                               std::size_t expected_size);
Vec3 as_vec3(const Json& j, const std::string& path);
// {"xyz": [x, y, z], "wxyz": [w, x, y, z]}
RigidTransform as_pose(const Json& j, const std::string& path);

Json to_json(const Vec3& v);
Json to_json(const RigidTransform& t);

}  // namespace handxfer::json_io
