#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aqsgee {

// Values double as CLI exit codes and C API status codes.
enum class ErrorCode : int {
  kLoad = 2,
  kNotConverged = 3,
  kSingular = 4,
  kInvalidArgument = 5,
  kConfig = 6,
  kOverflow = 7,
  kUnsupported = 8,
  kIo = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& what) : Error(ErrorCode::kLoad, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

class OverflowError : public Error {
 public:
  explicit OverflowError(const std::string& what) : Error(ErrorCode::kOverflow, what) {}
};

class Unsupported : public Error {
 public:
  explicit Unsupported(const std::string& what) : Error(ErrorCode::kUnsupported, what) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorCode::kNotConverged, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

/// A working correlation (or an iteration matrix) whose smallest eigenvalue fell
/// below the singularity tolerance. `index` is the 0-based individual whose
/// equation term needed the inverse; `npos` when not tied to an individual.
class SingularityError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  SingularityError(const std::string& what, std::size_t index, double lambda_min)
      : Error(ErrorCode::kSingular, what), index_(index), lambda_min_(lambda_min) {}
  std::size_t index() const noexcept { return index_; }
  double lambda_min() const noexcept { return lambda_min_; }

 private:
  std::size_t index_;
  double lambda_min_;
};

}  // namespace aqsgee
