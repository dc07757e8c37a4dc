#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace f4its {

enum class ErrorCode {
    InvalidArgument,
    ZeroVector,
    DimensionMismatch,
    NonFinite,
    NotNormalized,
    InvalidWeights,
    EmptyText,
    TextTooLong,
    BadMagic,
    VersionUnsupported,
    TruncatedFile,
    DimMismatch,
    DuplicateId,
    MixedDims,
    IoFailure,
    ServiceUnreachable,
    MalformedResponse,
    RemoteError,
    EmptyCorpus,
    MixedKinds,
    MalformedLine,
    UnknownKind,
    UnknownId,
    MissingPredictionText,
    UnknownCandidateId,
    NoItems,
    EmptyGroundTruth,
    UnknownGroundTruth,
    ConfigConflict,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception type used by every f4its operation. `code()` identifies the
/// failure class; `what()` carries "<Code>: <detail>".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace f4its
