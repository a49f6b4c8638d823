#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpo {

enum class ErrorCode {
  kParse,
  kValidation,
  kUnknownEntity,
  kUnknownAttribute,
  kUnknownToken,
  kMalformedTrajectory,
  kContextMismatch,
  kDegenerateTarget,
  kShapeMismatch,
  kVocabMismatch,
  kBadPrefix,
  kRegimeUnknown,
  kSpec,
  kIo,
  kSchema,
  kScheduleExhausted,
  kNonFiniteLoss,
  kConfig,
  kEmptyEvalSet,
  kEmptyReference,
  kEmptyInput,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the toolkit carries a machine-readable code so the
/// CLI can map it onto its fixed exit-code table.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Schema violation in a line-delimited corpus file; `line` is 1-based.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& message);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cpo
