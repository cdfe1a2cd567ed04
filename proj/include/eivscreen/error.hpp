#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eivscreen {

enum class ErrorCode {
    DimensionMismatch,
    AsymmetricSigmaU,
    IndefiniteSigmaU,
    IndexOutOfRange,
    LengthMismatch,
    AllFeaturesDegenerate,
    DTooLarge,
    MTooLarge,
    NonPositiveV,
    FoldsExceedN,
    NonPositiveDiagonal,
    BlockSizeIncompatible,
    FactorizationFailure,
    EmptyTrueSupport,
    UnrankedTrueFeature,
    ParseError,
    ValidationError,
    IoError,
    InvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this type; `code()` is stable
// and meant for programmatic dispatch, `what()` for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace eivscreen
