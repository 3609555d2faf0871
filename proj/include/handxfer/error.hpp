#pragma once

#include <stdexcept>
#include <string>

namespace handxfer {

// Base class for every error raised by the library. The CLI prints
// `what()` after a stage prefix, so messages stay on a single line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed document text.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line, std::size_t column)
      : Error(msg + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Well-formed document that violates its schema. `path` is the field path,
// e.g. "frames[0].object_pose".
class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& msg)
      : Error(path + ": " + msg), path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Structurally valid input that breaks a domain invariant (cycles, dangling
// references, inverted limits, ...).
class SemanticError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace handxfer
