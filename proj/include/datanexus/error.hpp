#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace datanexus {

enum class ErrorCode {
  invalid_identifier,
  invalid_record,
  invalid_category,
  merge_precondition,
  unresolvable_reference,
  invalid_confidence,
  invalid_argument,
  unknown_action,
  source_unreadable,
  artifact_missing,
  artifact_corrupt,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_identifier: return "invalid-identifier";
    case ErrorCode::invalid_record: return "invalid-record";
    case ErrorCode::invalid_category: return "invalid-category";
    case ErrorCode::merge_precondition: return "merge-precondition";
    case ErrorCode::unresolvable_reference: return "unresolvable-reference";
    case ErrorCode::invalid_confidence: return "invalid-confidence";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::unknown_action: return "unknown-action";
    case ErrorCode::source_unreadable: return "source-unreadable";
    case ErrorCode::artifact_missing: return "artifact-missing";
    case ErrorCode::artifact_corrupt: return "artifact-corrupt";
  }
  return "unknown";
}

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace datanexus
