#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace warplut {

// Every failure surfaced by the library derives from Error. The CLI maps the
// concrete type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension contract violated by a caller.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or architecture document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset missing, truncated or malformed.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::string path = {}, std::uint64_t offset = 0)
      : Error(what), path_(std::move(path)), offset_(offset) {}
  const std::string& path() const noexcept { return path_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::uint64_t offset_;
};

// Checkpoint unreadable, corrupt or of the wrong version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Backward pass requested without the forward cache it depends on.
class MissingCacheError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::int64_t step, int layer, double max_abs_param)
      : Error(what), step_(step), layer_(layer), max_abs_param_(max_abs_param) {}
  std::int64_t step() const noexcept { return step_; }
  int layer() const noexcept { return layer_; }
  double max_abs_param() const noexcept { return max_abs_param_; }

 private:
  std::int64_t step_;
  int layer_;
  double max_abs_param_;
};

}  // namespace warplut
