#include "types.hpp"

#include <cmath>

#include "errors.hpp"

namespace sena {

void validate_image(const ImageRecord& image) {
    if (image.image_id.empty()) {
        throw Error(ErrorCode::InvariantViolation, "image_id: empty");
    }
    if (image.pixels.values.size() != static_cast<size_t>(image.pixels.channels) *
                                          image.pixels.height * image.pixels.width) {
        throw Error(ErrorCode::InvariantViolation,
                    "pixels: value count does not match declared shape for image '" +
                        image.image_id + "'");
    }
    for (double v : image.pixels.values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::InvariantViolation,
                        "pixels: non-finite value in image '" + image.image_id + "'");
        }
        if (v < -1.0 || v > 1.0) {
            throw Error(ErrorCode::InvariantViolation,
                        "pixels: value outside [-1, 1] in image '" + image.image_id + "'");
        }
    }
}

const char* question_kind_name(QuestionKind kind) {
    return kind == QuestionKind::Descriptive ? "descriptive" : "generated";
}

QuestionKind question_kind_from_name(const std::string& name) {
    if (name == "descriptive") return QuestionKind::Descriptive;
    if (name == "generated") return QuestionKind::Generated;
    throw Error(ErrorCode::Parse, "question_kind must be 'descriptive' or 'generated', got '" +
                                      name + "'");
}

const PreferenceRecord& validate_record(const PreferenceRecord& record, int t_max) {
    if (record.image_id.empty()) {
        throw Error(ErrorCode::InvariantViolation, "image_id: empty");
    }
    if (record.question.empty()) {
        throw Error(ErrorCode::InvariantViolation, "question: empty");
    }
    if (record.chosen.empty()) {
        throw Error(ErrorCode::InvariantViolation, "chosen: empty answer");
    }
    if (record.rejected.empty()) {
        throw Error(ErrorCode::InvariantViolation, "rejected: empty answer");
    }
    if (record.chosen == record.rejected) {
        throw Error(ErrorCode::InvariantViolation, "degenerate pair: chosen == rejected");
    }
    if (record.noise_step < 1) {
        throw Error(ErrorCode::InvariantViolation,
                    "noise_step: " + std::to_string(record.noise_step) + " below 1");
    }
    if (t_max > 0 && record.noise_step > t_max) {
        throw Error(ErrorCode::InvariantViolation,
                    "noise_step: " + std::to_string(record.noise_step) + " above schedule maximum " +
                        std::to_string(t_max));
    }
    if (record.iteration < 1) {
        throw Error(ErrorCode::InvariantViolation,
                    "iteration: " + std::to_string(record.iteration) + " below 1");
    }
    return record;
}

}  // namespace sena
