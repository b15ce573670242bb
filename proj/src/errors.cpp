#include "errors.hpp"

namespace sena {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "IoError";
        case ErrorCode::Parse: return "ParseError";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::BackendFailure: return "BackendFailure";
        case ErrorCode::EmptyGeneration: return "EmptyGeneration";
        case ErrorCode::EmptyAnswer: return "EmptyAnswer";
        case ErrorCode::QuestionGenerationFailure: return "QuestionGenerationFailure";
        case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
        case ErrorCode::InvalidScheduleParams: return "InvalidScheduleParams";
        case ErrorCode::StepOutOfRange: return "StepOutOfRange";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::InsufficientImages: return "InsufficientImages";
        case ErrorCode::EmptyAnnotation: return "EmptyAnnotation";
        case ErrorCode::Internal: return "InternalError";
    }
    return "UnknownError";
}

}  // namespace sena
