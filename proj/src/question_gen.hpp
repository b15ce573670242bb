#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "backend.hpp"
#include "config.hpp"
#include "image_io.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace sena {

// One generation under the base question prompt, retried once on an empty
// result. Throws QuestionGenerationFailure naming the image when both
// attempts come back empty.
std::string generate_question(Backend& backend, const ImageRecord& image,
                              const PromptSet& prompts);

struct SqResult {
    std::string question;
    bool regenerated = false;
};

// Single answerability check on a generated question. A "Yes" verdict keeps
// it; a "No" verdict swaps in the replacement, taken from the text after the
// verdict or from one follow-up turn. The replacement is never re-checked.
// Throws UnparseableVerdict when the response starts with neither word.
SqResult self_question_check(Backend& backend, const ImageRecord& image, const std::string& q_gen,
                             const PromptSet& prompts);

std::string sample_descriptive_question(Rng& rng, const PromptSet& prompts);

// One triplet per id, in input order. Per-image randomness is split from the
// seed so worker count and scheduling cannot change the output.
std::vector<QuestionTriplet> build_triplets(Backend& backend, ImageStore& store,
                                            const std::vector<std::string>& ids,
                                            const PromptSet& prompts, uint64_t seed,
                                            int workers = 1);

}  // namespace sena
