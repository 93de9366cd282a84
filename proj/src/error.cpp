#include "zsca/error.hpp"

namespace zsca {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::NonFiniteFunction: return "NonFiniteFunction";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::MetadataMismatch: return "MetadataMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateToken: return "DuplicateToken";
    case ErrorCode::NonNumericValue: return "NonNumericValue";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptChecksum: return "CorruptChecksum";
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::UncoveredToken: return "UncoveredToken";
    case ErrorCode::MissingPairScore: return "MissingPairScore";
    case ErrorCode::UnassignedVerb: return "UnassignedVerb";
    case ErrorCode::UnseenLabelInTrain: return "UnseenLabelInTrain";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::TooFewClasses: return "TooFewClasses";
    case ErrorCode::SampleAlignmentMismatch: return "SampleAlignmentMismatch";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::NoSeenNodes: return "NoSeenNodes";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyPositives: return "EmptyPositives";
    case ErrorCode::UntrainableVariant: return "UntrainableVariant";
    case ErrorCode::OovToken: return "OovToken";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::AllZeroScores: return "AllZeroScores";
    case ErrorCode::MissingSeenOrUnseenSamples: return "MissingSeenOrUnseenSamples";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EmptyLabelSpace: return "EmptyLabelSpace";
    case ErrorCode::AllClassesProtected: return "AllClassesProtected";
    case ErrorCode::EmptyAfterFilter: return "EmptyAfterFilter";
    case ErrorCode::InvalidSizes: return "InvalidSizes";
    case ErrorCode::UnknownConfigKey: return "UnknownConfigKey";
    case ErrorCode::MissingConfigKey: return "MissingConfigKey";
    case ErrorCode::InvalidConfigValue: return "InvalidConfigValue";
    case ErrorCode::MissingPath: return "MissingPath";
  }
  return "UnknownError";
}

ErrorCategory error_category(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteFunction:
    case ErrorCode::NonFiniteLoss:
      return ErrorCategory::Numeric;
    case ErrorCode::UntrainableVariant:
    case ErrorCode::InvalidSizes:
    case ErrorCode::UnknownConfigKey:
    case ErrorCode::MissingConfigKey:
    case ErrorCode::InvalidConfigValue:
    case ErrorCode::MissingPath:
      return ErrorCategory::Config;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace zsca
