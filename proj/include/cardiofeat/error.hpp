#pragma once

#include <stdexcept>
#include <string>

namespace cardiofeat {

enum class ErrorCode {
    // volgrid
    MalformedHeader,
    UnsupportedDatatype,
    IoError,
    InvalidCode,
    InvalidSpacing,
    // shared
    GeometryMismatch,
    EmptyMask,
    // atlasreg / geomfeat / segmetrics
    EmptyCohort,
    InvalidNSvd,
    EmptySurface,
    // classifier
    ColumnMismatch,
    DimensionMismatch,
    LengthMismatch,
    InsufficientData,
    NonFiniteLoss,
    InvalidArgument,
    // cli
    ConfigError,
};

// Coarse grouping used for CLI exit codes.
enum class ErrorCategory { Config, Data, Numeric };

const char *to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

    ErrorCode code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }
    /// Text without the code prefix.
    const std::string &message() const noexcept { return message_; }
    /// Same code, message prefixed (e.g. "[register] sub007: ").
    Error with_context(const std::string &prefix) const { return Error(code_, prefix + message_); }

private:
    ErrorCode code_;
    std::string message_;
};

}  // namespace cardiofeat
