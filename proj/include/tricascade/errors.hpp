#pragma once

#include <stdexcept>
#include <string>

namespace tricascade {

/// Broad failure classes; the CLI maps each one to its own exit code.
enum class ErrorCategory { config = 2, format = 3, compute = 4, io = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Malformed ladder, routing, axis mismatch, unsorted input.
class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(ErrorCategory::config, line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorCategory::format, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Rate generator whose null space is not one-dimensional.
class DegeneracyError : public Error {
 public:
  explicit DegeneracyError(const std::string& what) : Error(ErrorCategory::compute, what) {}
};

/// g2 requested where the steady-state flux of the stop line vanishes.
class NormalizationError : public Error {
 public:
  explicit NormalizationError(const std::string& what) : Error(ErrorCategory::compute, what) {}
};

class SizeError : public Error {
 public:
  explicit SizeError(const std::string& what) : Error(ErrorCategory::compute, what) {}
};

class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& what) : Error(ErrorCategory::compute, what) {}
};

}  // namespace tricascade
