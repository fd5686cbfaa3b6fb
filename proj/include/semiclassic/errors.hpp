#pragma once

#include <stdexcept>
#include <string>

namespace semiclassic {

// Common base so call sites can distinguish domain errors from std failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- validation errors (CLI exit code 2) ---

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& field)
      : Error("schema violation at field \"" + field + "\""), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& what) : Error(what) {}
};

class UnsupportedPathError : public Error {
 public:
  explicit UnsupportedPathError(const std::string& what) : Error(what) {}
};

// --- degenerate-input errors (CLI exit code 3) ---

class DegenerateFixedPointError : public Error {
 public:
  explicit DegenerateFixedPointError(const std::string& what) : Error(what) {}
};

class ParabolicError : public Error {
 public:
  explicit ParabolicError(const std::string& what) : Error(what) {}
};

class NonIsolatedError : public Error {
 public:
  explicit NonIsolatedError(const std::string& what) : Error(what) {}
};

class CentralPointError : public Error {
 public:
  explicit CentralPointError(const std::string& what) : Error(what) {}
};

// --- kernel detection (CLI exit code 4) ---

class KernelError : public Error {
 public:
  explicit KernelError(const std::string& what) : Error(what) {}
};

// --- internal-consistency failures (CLI exit code 5) ---

class MatchingError : public Error {
 public:
  explicit MatchingError(const std::string& what) : Error(what) {}
};

class OracleMismatchError : public Error {
 public:
  explicit OracleMismatchError(const std::string& what) : Error(what) {}
};

// --- I/O (CLI exit code 6) ---

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace semiclassic
