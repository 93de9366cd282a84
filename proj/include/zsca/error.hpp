#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zsca {

enum class ErrorCode {
  // numerics
  ShapeMismatch,
  LabelOutOfRange,
  ProbabilityOutOfRange,
  NonFiniteFunction,
  NonFiniteLoss,
  // corpora_io
  IoError,
  BadMagic,
  TruncatedFile,
  MetadataMismatch,
  DimensionMismatch,
  DuplicateToken,
  NonNumericValue,
  MalformedLine,
  VersionMismatch,
  CorruptChecksum,
  MissingSection,
  // vocab_graph
  UncoveredToken,
  MissingPairScore,
  UnassignedVerb,
  // heads
  UnseenLabelInTrain,
  EmptyTrainSet,
  TooFewClasses,
  SampleAlignmentMismatch,
  // gcn_zero_shot
  MissingEmbedding,
  NoSeenNodes,
  IndexOutOfRange,
  // affordance
  EmptyPositives,
  UntrainableVariant,
  OovToken,
  ZeroVector,
  // eval
  AllZeroScores,
  MissingSeenOrUnseenSamples,
  KTooLarge,
  EmptyLabelSpace,
  // cli
  AllClassesProtected,
  EmptyAfterFilter,
  InvalidSizes,
  UnknownConfigKey,
  MissingConfigKey,
  InvalidConfigValue,
  MissingPath,
};

enum class ErrorCategory { Config, Data, Numeric };

std::string_view error_name(ErrorCode code);
ErrorCategory error_category(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace zsca
