#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fsr {

enum class ErrorCode {
  kShapeMismatch,
  kNotScalar,
  kDetachedGraph,
  kEmptyRange,
  kCorruptManifest,
  kPayloadLengthMismatch,
  kConfigMismatch,
  kDomainError,
  kEmptyBatch,
  kNoTrainingData,
  kMissingEncoder,
  kEmptySupport,
  kEmptyContext,
  kAllZeroWeights,
  kNoPresences,
  kFewerThanTwoMembers,
  kNoPositives,
  kGeometryMismatch,
  kEmptyGroup,
  kParseError,
  kOutOfRangeCoordinate,
  kDegenerateSpecies,
  kEmbeddingDimMismatch,
  kIoError,
};

std::string_view error_name(ErrorCode code);

// Single exception type for every domain failure; `code()` identifies which.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fsr
