#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scimine {

enum class ErrorCode {
  NotFound,
  NoSource,
  Network,
  ParseFailure,
  MissingDocument,
  UnknownSourceType,
  BackendUnavailable,
  BackendProtocol,
  EmptyTrainingSet,
  PayloadTooLarge,
  StaleVersion,
  InvalidCorrection,
  NoNewGold,
  EmptyCorpus,
  AddrInUse,
  WorkspaceLocked,
  TaskConflict,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace scimine
