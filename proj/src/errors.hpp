#pragma once

#include <stdexcept>
#include <string>

namespace sena {

// Error categories. Kept in sync with the sena_status codes of the C API;
// see capi/sena_capi.cpp for the mapping.
enum class ErrorCode {
    InvalidArgument,
    Io,
    Parse,
    InvariantViolation,
    BackendFailure,
    EmptyGeneration,
    EmptyAnswer,
    QuestionGenerationFailure,
    UnparseableVerdict,
    InvalidScheduleParams,
    StepOutOfRange,
    NonFiniteInput,
    EmptyDataset,
    InsufficientImages,
    EmptyAnnotation,
    Internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Parse failures carry the 1-based line number of the offending record.
class ParseError : public Error {
public:
    ParseError(size_t line, const std::string& message)
        : Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    size_t line() const { return line_; }

private:
    size_t line_;
};

}  // namespace sena
