#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace infocluster {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kIndexOutOfRange,
  kOverlappingSets,
  kSingular,
  kNumericalDomain,
  kUnstable,
  kNonConvergence,
  kParse,
  kDataNotFound,
  kUnknownFormat,
  kConfig,
  kIo,
};

/// Machine-parsable name of an error code, e.g. "DATA_NOT_FOUND".
inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kIndexOutOfRange: return "INDEX_OUT_OF_RANGE";
    case ErrorCode::kOverlappingSets: return "OVERLAPPING_SETS";
    case ErrorCode::kSingular: return "SINGULAR";
    case ErrorCode::kNumericalDomain: return "NUMERICAL_DOMAIN";
    case ErrorCode::kUnstable: return "UNSTABLE";
    case ErrorCode::kNonConvergence: return "NON_CONVERGENCE";
    case ErrorCode::kParse: return "PARSE_ERROR";
    case ErrorCode::kDataNotFound: return "DATA_NOT_FOUND";
    case ErrorCode::kUnknownFormat: return "UNKNOWN_FORMAT";
    case ErrorCode::kConfig: return "CONFIG_ERROR";
    case ErrorCode::kIo: return "IO_ERROR";
  }
  return "UNKNOWN";
}

/// Exception type thrown by every operation in the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace infocluster
