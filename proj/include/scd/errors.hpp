#pragma once

#include <stdexcept>
#include <string>

namespace scd {

enum class ErrorKind {
  kInvalidDepth,
  kBehindCamera,
  kIllConditionedLog,
  kDimension,
  kEmptyValidSet,
  kDegenerateScale,
  kNoValidSubsequence,
  kEmptyMask,
  kInvalidScene,
  kInvalidArgument,
  kIo,
};

const char* to_string(ErrorKind kind);

/// Error thrown by every library operation. `kind()` lets callers (the CLI in
/// particular) map failures to exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace scd
