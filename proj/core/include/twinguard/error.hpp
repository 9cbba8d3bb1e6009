#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twinguard {

enum class ErrorCode {
  UnknownProfile,
  InvalidProfile,
  DuplicateFeature,
  DictionaryCollision,
  MissingFeature,
  UnparseableNumeric,
  UnknownLabel,
  Io,
  DatasetRow,
  InsufficientRecords,
  UnknownNode,
  IllegalTransition,
  EmptyTrainingSet,
  SingleClassData,
  InvalidFeatures,
  SchemaMismatch,
  InvalidModel,
  SizeMismatch,
  EmptyBaseline,
  InvalidConfig,
  UnknownRequest,
  AlreadyResolved,
  InvalidSpec,
  DataShortfall,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace twinguard
