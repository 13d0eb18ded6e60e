#pragma once

#include <stdexcept>
#include <string>

#include "asma/precision.hpp"

ASMA_NAMESPACE_BEGIN

enum class ErrorCode {
    InvalidArgument,
    ShapeMismatch,
    NonFiniteDetected,
    NotScalar,
    NoTape,
    MalformedRecord,
    NonNumericField,
    EmptyFile,
    MissingParents,
    DegenerateGraph,
    BatchTooSmall,
    ZeroVector,
    CheckpointMismatch,
    DatasetEmpty,
    LabelSpaceMismatch,
    Io,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

// Error raised while reading line-oriented input; carries the 1-based line number.
class ParseError : public Error {
   public:
    ParseError(ErrorCode code, std::size_t line, const std::string& message)
        : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

   private:
    std::size_t line_;
};

ASMA_NAMESPACE_END
