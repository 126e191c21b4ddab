#include "fsr/error.hpp"

namespace fsr {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kDetachedGraph: return "DetachedGraph";
    case ErrorCode::kEmptyRange: return "EmptyRange";
    case ErrorCode::kCorruptManifest: return "CorruptManifest";
    case ErrorCode::kPayloadLengthMismatch: return "PayloadLengthMismatch";
    case ErrorCode::kConfigMismatch: return "ConfigMismatch";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kNoTrainingData: return "NoTrainingData";
    case ErrorCode::kMissingEncoder: return "MissingEncoder";
    case ErrorCode::kEmptySupport: return "EmptySupport";
    case ErrorCode::kEmptyContext: return "EmptyContext";
    case ErrorCode::kAllZeroWeights: return "AllZeroWeights";
    case ErrorCode::kNoPresences: return "NoPresences";
    case ErrorCode::kFewerThanTwoMembers: return "FewerThanTwoMembers";
    case ErrorCode::kNoPositives: return "NoPositives";
    case ErrorCode::kGeometryMismatch: return "GeometryMismatch";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kOutOfRangeCoordinate: return "OutOfRangeCoordinate";
    case ErrorCode::kDegenerateSpecies: return "DegenerateSpecies";
    case ErrorCode::kEmbeddingDimMismatch: return "EmbeddingDimMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fsr
