#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chatcad {

enum class ErrorCode {
  // domain-dispatch
  EmptyRegistry,
  DimensionMismatch,
  ZeroNormVector,
  DuplicateDomain,
  UnknownDomain,
  UnknownImage,
  MalformedModelOutput,
  // prob2text
  ProbOutOfRange,
  // report-index
  ZeroEmbedding,
  EmptyCorpus,
  AllDocumentsEmpty,
  InvalidTermSet,
  InvalidArgument,
  MalformedIndex,
  // report-pipeline
  TemplateError,
  // knowledge-base
  DuplicateSiblingTitle,
  EmptyDocument,
  MalformedStructure,
  PathNotFound,
  // knowledge-retrieval
  ParseFailure,
  PreconditionViolation,
  // llm-gateway
  LlmUnavailable,
  AuthError,
  ResponseMalformed,
  MockExhausted,
  // eval-metrics
  LengthMismatch,
  // service / io
  ConfigError,
  IoError,
  NotFound,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI exit codes, HTTP status mapping) can switch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chatcad
