#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tbrain {

enum class ErrorCode {
  kInvalidIndex,
  kEmptyHistory,
  kEmptySupport,
  kUnsupportedCondition,
  kInfeasibleSplit,
  kShape,
  kNumericOverflow,
  kMissingEngram,
  kOverwriteRefused,
  kNotApplicable,
  kParse,
  kConfig,
  kIo,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidIndex: return "invalid-index";
    case ErrorCode::kEmptyHistory: return "empty-history";
    case ErrorCode::kEmptySupport: return "empty-support";
    case ErrorCode::kUnsupportedCondition: return "unsupported-condition";
    case ErrorCode::kInfeasibleSplit: return "infeasible-split";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNumericOverflow: return "numeric-overflow";
    case ErrorCode::kMissingEngram: return "missing-engram";
    case ErrorCode::kOverwriteRefused: return "overwrite-refused";
    case ErrorCode::kNotApplicable: return "not-applicable";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

// All library failures surface as this exception; code() is stable for callers
// that need to branch on the category (the CLI maps it to exit codes).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tbrain
