#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sena {

// Dense pixel array, channel-major (c, y, x) row-major layout.
struct ImageArray {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    size_t size() const { return values.size(); }

    double& at(int c, int y, int x) {
        return values[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return values[(static_cast<size_t>(c) * height + y) * width + x];
    }

    bool same_shape(const ImageArray& other) const {
        return channels == other.channels && height == other.height && width == other.width;
    }
};

// One database image. Pixels are normalized to [-1, 1] at load time and the
// dataset files only ever carry the id and the uri, never the payload.
struct ImageRecord {
    std::string image_id;
    std::string uri;
    ImageArray pixels;
};

// Validates finiteness and the [-1, 1] value range. Throws InvariantViolation.
void validate_image(const ImageRecord& image);

struct QuestionTriplet {
    std::string image_id;
    std::string uri;
    std::string q_des;
    std::string q_gen_sq;
    std::string q_gen_raw;
    bool sq_regenerated = false;
};

enum class QuestionKind {
    Descriptive,
    Generated,
};

const char* question_kind_name(QuestionKind kind);
QuestionKind question_kind_from_name(const std::string& name);

// One DPO training example: the chosen answer after self-enhancement against
// the rejected answer generated from the noised image.
struct PreferenceRecord {
    std::string image_id;
    std::string question;
    QuestionKind question_kind = QuestionKind::Descriptive;
    std::string chosen;
    std::string rejected;
    std::string chosen_raw;
    int noise_step = 0;
    int iteration = 0;

    bool operator==(const PreferenceRecord& other) const = default;
};

// Returns the record unchanged when all invariants hold; throws
// InvariantViolation naming the failed field otherwise. When t_max > 0 the
// noise step is additionally checked against the schedule length.
const PreferenceRecord& validate_record(const PreferenceRecord& record, int t_max = 0);

}  // namespace sena
