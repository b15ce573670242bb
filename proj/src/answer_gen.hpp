#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "backend.hpp"
#include "config.hpp"
#include "corruption.hpp"
#include "image_io.hpp"
#include "types.hpp"

namespace sena {

// Counters accumulated while assembling preference data. Failures degrade to
// skipped records, never to an aborted batch, so the totals are the only
// trace of what was dropped.
struct PairBuildStats {
    size_t records = 0;
    size_t degenerate_dropped = 0;
    size_t generation_failures = 0;
    size_t se_fallbacks = 0;

    PairBuildStats& operator+=(const PairBuildStats& other) {
        records += other.records;
        degenerate_dropped += other.degenerate_dropped;
        generation_failures += other.generation_failures;
        se_fallbacks += other.se_fallbacks;
        return *this;
    }
};

// Greedy answer on the clean image. Throws EmptyGeneration on a blank result.
std::string generate_chosen(Backend& backend, const ImageRecord& image,
                            const std::string& question);

// Greedy answer conditioned on the noised pixels; the clean image never
// enters this call.
std::string generate_rejected(Backend& backend, const std::string& image_id,
                              const ImageArray& noisy, const std::string& question);

// One enhancement pass over a prior answer, conditioned on the image and the
// descriptive answer. Returns the prior answer unchanged when the backend
// comes back empty (fallback, flagged via fell_back). self_referential marks
// the description enhancing itself, which switches to the dedup template when
// configured.
std::string self_enhance(Backend& backend, const ImageRecord& image, const std::string& question,
                         const std::string& answer, const std::string& description,
                         const EvolutionConfig& config, bool self_referential,
                         bool* fell_back = nullptr);

// Assembles the records for one triplet in the fixed order: descriptive
// chosen, generated chosen, one noisy draw feeding both rejected answers,
// then self-enhancement of both chosen answers against the descriptive one.
// Returns at most one record per enabled question kind; degenerate pairs and
// failed generations are dropped and counted.
std::vector<PreferenceRecord> build_preference_pairs(Backend& backend, const ImageRecord& image,
                                                     const QuestionTriplet& triplet,
                                                     const NoiseSchedule& schedule,
                                                     const EvolutionConfig& config, int iteration,
                                                     PairBuildStats* stats = nullptr);

// build_preference_pairs over a triplet list, order-preserving within the
// output. Worker parallelism keeps per-triplet sequencing intact.
std::vector<PreferenceRecord> build_preference_dataset(
    Backend& backend, ImageStore& store, const std::vector<QuestionTriplet>& triplets,
    const NoiseSchedule& schedule, const EvolutionConfig& config, int iteration,
    PairBuildStats* stats = nullptr, int workers = 1);

}  // namespace sena
