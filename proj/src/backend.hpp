#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "types.hpp"

namespace sena {

enum class Role { User, Assistant };

struct Turn {
    Role role;
    std::string text;
};

// Image handed to a backend call. Noisy arrays (post-corruption) are passed
// with noisy=true and may exceed [-1, 1]; pixels may be null for backends
// that never look at them.
struct ImageInput {
    std::string image_id;
    const ImageArray* pixels = nullptr;
    bool noisy = false;
};

inline ImageInput clean_input(const ImageRecord& image) {
    return ImageInput{image.image_id, &image.pixels, false};
}

inline ImageInput noisy_input(const std::string& image_id, const ImageArray& pixels) {
    return ImageInput{image_id, &pixels, true};
}

// Exactly one image plus alternating turns starting with a user turn.
struct ConversationContext {
    ImageInput image;
    std::vector<Turn> turns;

    // Throws InvalidArgument when the alternation invariant is broken.
    void validate() const;
    const std::string& last_user_text() const;
};

// Per-token log-probabilities of an answer, teacher-forced on the given
// text. Stored in log space; the token-probability product is never formed.
struct SequenceLikelihood {
    std::vector<double> token_logprobs;
    double sum_logprob = 0.0;
    size_t length = 0;
    double mean_logprob = 0.0;

    static SequenceLikelihood from_token_logprobs(std::vector<double> logprobs);
};

class Backend {
public:
    virtual ~Backend() = default;

    // Greedy generation: deterministic for a fixed backend state and context.
    // Throws EmptyGeneration when the model emits nothing but a stop token.
    virtual std::string generate(const ConversationContext& context) = 0;

    // Log-likelihood of the answer tokens only; the prompt conditions but is
    // never scored.
    virtual SequenceLikelihood score_answer(const ImageInput& image, const std::string& question,
                                            const std::string& answer) = 0;

    // Frozen copy that scores identically to this backend at call time.
    virtual std::shared_ptr<Backend> snapshot() const = 0;

    virtual bool trainable() const { return false; }
};

// Surface the trainer needs: a flat parameter vector, gradient accumulation
// through score_answer, and parameter checkpointing.
class TrainableBackend : public Backend {
public:
    bool trainable() const override { return true; }

    virtual size_t num_params() const = 0;
    virtual std::span<double> params() = 0;
    virtual std::span<const double> params() const = 0;

    virtual void zero_grad() = 0;
    virtual std::span<const double> grad() const = 0;

    // Accumulates d(sum_s upstream[s] * logprob[s]) / d(params) into the
    // gradient buffer. upstream must have one entry per answer token.
    virtual void accumulate_answer_grad(const ImageInput& image, const std::string& question,
                                        const std::string& answer,
                                        std::span<const double> upstream) = 0;

    virtual void save_params(const std::filesystem::path& path) const = 0;
    virtual void load_params(const std::filesystem::path& path) = 0;
    virtual std::string params_digest() const = 0;
};

// Instantiates the configured backend kind. External adapters register a
// factory under their identifier before calling this.
std::shared_ptr<Backend> make_backend(const EvolutionConfig& config);

using ExternalBackendFactory =
    std::function<std::shared_ptr<Backend>(const EvolutionConfig&)>;
void register_external_backend(const std::string& identifier, ExternalBackendFactory factory);

// Whitespace/punctuation tokenizer shared by the toy backend and the mock's
// deterministic scoring. Lowercases and splits on non-alphanumerics.
std::vector<std::string> tokenize_words(const std::string& text);

}  // namespace sena
