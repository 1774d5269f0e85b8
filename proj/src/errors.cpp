#include "scd/errors.hpp"

namespace scd {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidDepth: return "invalid depth";
    case ErrorKind::kBehindCamera: return "behind camera";
    case ErrorKind::kIllConditionedLog: return "ill-conditioned log";
    case ErrorKind::kDimension: return "dimension mismatch";
    case ErrorKind::kEmptyValidSet: return "empty valid set";
    case ErrorKind::kDegenerateScale: return "degenerate scale";
    case ErrorKind::kNoValidSubsequence: return "no valid subsequence";
    case ErrorKind::kEmptyMask: return "empty mask";
    case ErrorKind::kInvalidScene: return "invalid scene";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kIo: return "i/o error";
  }
  return "unknown error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace scd
