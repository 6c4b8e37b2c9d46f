#include "cardiofeat/error.hpp"

namespace cardiofeat {

const char *to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidCode: return "InvalidCode";
    case ErrorCode::InvalidSpacing: return "InvalidSpacing";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::InvalidNSvd: return "InvalidNSvd";
    case ErrorCode::EmptySurface: return "EmptySurface";
    case ErrorCode::ColumnMismatch: return "ColumnMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "UnknownError";
}

ErrorCategory category_of(ErrorCode code) {
    switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidNSvd:
    case ErrorCode::InvalidSpacing:
    case ErrorCode::InvalidCode:
        return ErrorCategory::Config;
    case ErrorCode::NonFiniteLoss:
        return ErrorCategory::Numeric;
    default:
        return ErrorCategory::Data;
    }
}

}  // namespace cardiofeat
