#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteDetected: return "NonFiniteDetected";
        case ErrorCode::NotScalar: return "NotScalar";
        case ErrorCode::NoTape: return "NoTape";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::NonNumericField: return "NonNumericField";
        case ErrorCode::EmptyFile: return "EmptyFile";
        case ErrorCode::MissingParents: return "MissingParents";
        case ErrorCode::DegenerateGraph: return "DegenerateGraph";
        case ErrorCode::BatchTooSmall: return "BatchTooSmall";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
        case ErrorCode::DatasetEmpty: return "DatasetEmpty";
        case ErrorCode::LabelSpaceMismatch: return "LabelSpaceMismatch";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

ASMA_NAMESPACE_END
