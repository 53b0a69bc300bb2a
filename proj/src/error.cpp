#include "ragsc/error.hpp"

namespace ragsc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidThresholds: return "InvalidThresholds";
    case ErrorCode::MalformedStream: return "MalformedStream";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TruncatedFrame: return "TruncatedFrame";
    case ErrorCode::LengthNotMultipleOf3: return "LengthNotMultipleOf3";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CorruptStore: return "CorruptStore";
    case ErrorCode::ReviewerUnavailable: return "ReviewerUnavailable";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::ServiceUnavailable: return "ServiceUnavailable";
    case ErrorCode::ServiceTimeout: return "ServiceTimeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ragsc
