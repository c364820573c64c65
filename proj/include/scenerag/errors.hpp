#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace scenerag {

enum class ErrorCode {
  // signal / solver
  EmptySignal,
  NonFiniteInput,
  InvalidLambda,
  LengthMismatch,
  NonConvergence,
  // tiling
  EmptyInput,
  IndexOutOfRange,
  // memory bank
  DimensionMismatch,
  DuplicateEntryId,
  DenormalizedEmbedding,
  EmptyBank,
  NoClues,
  IoFailure,
  CorruptBank,
  VersionMismatch,
  // model clients
  EndpointUnavailable,
  MalformedResponse,
  Timeout,
  // pipeline
  TooFewFrames,
  // evaluation
  UnknownQaId,
  MissingGold,
  BadEdges,
  // config / misc
  BadConfig,
  InvalidArgument,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptySignal: return "EmptySignal";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::InvalidLambda: return "InvalidLambda";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateEntryId: return "DuplicateEntryId";
    case ErrorCode::DenormalizedEmbedding: return "DenormalizedEmbedding";
    case ErrorCode::EmptyBank: return "EmptyBank";
    case ErrorCode::NoClues: return "NoClues";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::CorruptBank: return "CorruptBank";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::EndpointUnavailable: return "EndpointUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::UnknownQaId: return "UnknownQaId";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::BadEdges: return "BadEdges";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// Library-wide exception. `stage` is set when a pipeline stage rethrows a
// component failure so callers can tell which stage aborted.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Error(ErrorCode code, std::string stage, std::string message)
      : std::runtime_error(stage + ": " + message),
        code_(code),
        stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  ErrorCode code_;
  std::string stage_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace scenerag
