#include "chatcad/error.hpp"

namespace chatcad {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyRegistry: return "EmptyRegistry";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroNormVector: return "ZeroNormVector";
    case ErrorCode::DuplicateDomain: return "DuplicateDomain";
    case ErrorCode::UnknownDomain: return "UnknownDomain";
    case ErrorCode::UnknownImage: return "UnknownImage";
    case ErrorCode::MalformedModelOutput: return "MalformedModelOutput";
    case ErrorCode::ProbOutOfRange: return "ProbOutOfRange";
    case ErrorCode::ZeroEmbedding: return "ZeroEmbedding";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::AllDocumentsEmpty: return "AllDocumentsEmpty";
    case ErrorCode::InvalidTermSet: return "InvalidTermSet";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedIndex: return "MalformedIndex";
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::DuplicateSiblingTitle: return "DuplicateSiblingTitle";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::MalformedStructure: return "MalformedStructure";
    case ErrorCode::PathNotFound: return "PathNotFound";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::LlmUnavailable: return "LlmUnavailable";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::ResponseMalformed: return "ResponseMalformed";
    case ErrorCode::MockExhausted: return "MockExhausted";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace chatcad
