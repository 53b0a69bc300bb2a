#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ragsc {

enum class ErrorCode {
  InvalidArgument,
  InvalidThresholds,
  MalformedStream,
  LengthMismatch,
  IndexOutOfRange,
  TruncatedFrame,
  LengthNotMultipleOf3,
  DimensionMismatch,
  CorruptStore,
  ReviewerUnavailable,
  BudgetTooSmall,
  ServiceUnavailable,
  ServiceTimeout,
  MalformedResponse,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library is an Error; callers that need to
// distinguish channel corruption from misuse switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace ragsc
