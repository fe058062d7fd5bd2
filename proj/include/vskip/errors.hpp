#pragma once

#include <stdexcept>
#include <string>

namespace vskip {

// Bad argument to a pure operation (out-of-range score, length mismatch, ...).
struct DomainError : std::invalid_argument {
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Input data violates the trace schema or its invariants. CLI exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A pipeline stage cannot proceed (empty post-filter set, ...). CLI exit code 3.
struct PipelineError : std::runtime_error {
  explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

// Optimizer produced a non-finite gradient or update.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vskip
