#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace egogest {

enum class ErrorCode {
  NonPositiveDepth,
  DegenerateConfiguration,
  PointAtInfinity,
  DecompositionFailure,
  LayoutMismatch,
  ShapeMismatch,
  LabelOutOfRange,
  StaleCache,
  SequenceTooShort,
  InsufficientClassMembers,
  IncompatibleRate,
  UnknownVersion,
  VersionMismatch,
  MalformedRecord,
  LengthMismatch,
  InvalidArgument,
  Io,
  Divergence,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::DecompositionFailure: return "DecompositionFailure";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::SequenceTooShort: return "SequenceTooShort";
    case ErrorCode::InsufficientClassMembers: return "InsufficientClassMembers";
    case ErrorCode::IncompatibleRate: return "IncompatibleRate";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Divergence: return "Divergence";
  }
  return "Unknown";
}

}  // namespace egogest
