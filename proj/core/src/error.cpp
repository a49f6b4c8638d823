#include "cpo/error.hpp"

namespace cpo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kUnknownEntity: return "UnknownEntity";
    case ErrorCode::kUnknownAttribute: return "UnknownAttribute";
    case ErrorCode::kUnknownToken: return "UnknownToken";
    case ErrorCode::kMalformedTrajectory: return "MalformedTrajectory";
    case ErrorCode::kContextMismatch: return "ContextMismatch";
    case ErrorCode::kDegenerateTarget: return "DegenerateTarget";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kVocabMismatch: return "VocabMismatch";
    case ErrorCode::kBadPrefix: return "BadPrefix";
    case ErrorCode::kRegimeUnknown: return "RegimeUnknown";
    case ErrorCode::kSpec: return "SpecError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kScheduleExhausted: return "ScheduleExhausted";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kEmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kEmptyInput: return "EmptyInput";
  }
  return "Error";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

SchemaError::SchemaError(std::size_t line, const std::string& message)
    : Error(ErrorCode::kSchema, "line " + std::to_string(line) + ": " + message), line_(line) {}

}  // namespace cpo
