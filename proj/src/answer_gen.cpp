#include "answer_gen.hpp"

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include "errors.hpp"
#include "util.hpp"

namespace sena {

namespace {

std::string generate_or_throw_empty(Backend& backend, const ConversationContext& ctx) {
    std::string text = strip_text(backend.generate(ctx));
    if (text.empty()) {
        throw Error(ErrorCode::EmptyGeneration, "backend returned only whitespace");
    }
    return text;
}

}  // namespace

std::string generate_chosen(Backend& backend, const ImageRecord& image,
                            const std::string& question) {
    if (question.empty()) {
        throw Error(ErrorCode::InvalidArgument, "cannot answer an empty question");
    }
    ConversationContext ctx{clean_input(image), {{Role::User, question}}};
    return generate_or_throw_empty(backend, ctx);
}

std::string generate_rejected(Backend& backend, const std::string& image_id,
                              const ImageArray& noisy, const std::string& question) {
    if (question.empty()) {
        throw Error(ErrorCode::InvalidArgument, "cannot answer an empty question");
    }
    ConversationContext ctx{noisy_input(image_id, noisy), {{Role::User, question}}};
    return generate_or_throw_empty(backend, ctx);
}

std::string self_enhance(Backend& backend, const ImageRecord& image, const std::string& question,
                         const std::string& answer, const std::string& description,
                         const EvolutionConfig& config, bool self_referential,
                         bool* fell_back) {
    if (fell_back) {
        *fell_back = false;
    }
    std::string prompt;
    if (self_referential && config.se_dedup_description) {
        prompt = replace_all(config.prompts.p_se_self, "{question}", question);
        prompt = replace_all(prompt, "{answer}", answer);
    } else {
        prompt = replace_all(config.prompts.p_se, "{description}", description);
        prompt = replace_all(prompt, "{question}", question);
        prompt = replace_all(prompt, "{answer}", answer);
    }
    ConversationContext ctx{clean_input(image), {{Role::User, prompt}}};
    try {
        return generate_or_throw_empty(backend, ctx);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyGeneration) {
            throw;
        }
        if (fell_back) {
            *fell_back = true;
        }
        return answer;
    }
}

std::vector<PreferenceRecord> build_preference_pairs(Backend& backend, const ImageRecord& image,
                                                     const QuestionTriplet& triplet,
                                                     const NoiseSchedule& schedule,
                                                     const EvolutionConfig& config, int iteration,
                                                     PairBuildStats* stats) {
    PairBuildStats local;
    const std::string& id = triplet.image_id;

    auto guarded = [&](const char* what,
                       const std::function<std::string()>& fn) -> std::optional<std::string> {
        try {
            return fn();
        } catch (const Error& e) {
            ++local.generation_failures;
            log_warn(std::string(what) + " failed for image '" + id + "': " + e.what());
            return std::nullopt;
        }
    };

    // (1) Descriptive answer first; every later step leans on it.
    std::optional<std::string> y_des =
        guarded("descriptive answer", [&] { return generate_chosen(backend, image, triplet.q_des); });

    // (2) Answer to the self-verified generated question.
    std::optional<std::string> y_gen;
    if (config.pairs_on_generated) {
        y_gen = guarded("generated-question answer",
                        [&] { return generate_chosen(backend, image, triplet.q_gen_sq); });
    }

    // (3) One noisy draw; both rejected answers condition on the same pixels.
    bool want_des = config.pairs_on_descriptive && y_des.has_value();
    bool want_gen = config.pairs_on_generated && y_gen.has_value();
    std::optional<std::string> rej_des, rej_gen;
    if (want_des || want_gen) {
        Rng noise_rng = corruption_rng(config.seed, id, config.noise_steps);
        ImageArray noisy = corrupt_image(image.pixels, config.noise_steps, schedule, noise_rng,
                                         config.clamp_noisy);
        if (want_des) {
            rej_des = guarded("rejected descriptive answer",
                              [&] { return generate_rejected(backend, id, noisy, triplet.q_des); });
        }
        if (want_gen) {
            rej_gen = guarded("rejected generated-question answer", [&] {
                return generate_rejected(backend, id, noisy, triplet.q_gen_sq);
            });
        }
    }

    // (4) Self-enhancement of both chosen answers against the descriptive one.
    std::optional<std::string> chosen_des, chosen_gen;
    if (want_des && rej_des) {
        if (config.se_on_descriptive) {
            bool fell_back = false;
            chosen_des = self_enhance(backend, image, triplet.q_des, *y_des, *y_des, config,
                                      /*self_referential=*/true, &fell_back);
            if (fell_back) {
                ++local.se_fallbacks;
            }
        } else {
            chosen_des = *y_des;
        }
    }
    if (want_gen && rej_gen) {
        if (config.se_on_generated && y_des.has_value()) {
            bool fell_back = false;
            chosen_gen = self_enhance(backend, image, triplet.q_gen_sq, *y_gen, *y_des, config,
                                      /*self_referential=*/false, &fell_back);
            if (fell_back) {
                ++local.se_fallbacks;
            }
        } else {
            if (config.se_on_generated && !y_des.has_value()) {
                ++local.se_fallbacks;
                log_warn("no descriptive answer for image '" + id +
                         "', keeping the raw generated-question answer");
            }
            chosen_gen = *y_gen;
        }
    }

    std::vector<PreferenceRecord> records;
    auto emit = [&](const std::string& question, QuestionKind kind, const std::string& chosen,
                    const std::string& raw, const std::string& rejected) {
        if (chosen == rejected) {
            ++local.degenerate_dropped;
            log_warn("degenerate pair dropped for image '" + id + "' (" +
                     question_kind_name(kind) + ")");
            return;
        }
        PreferenceRecord r;
        r.image_id = id;
        r.question = question;
        r.question_kind = kind;
        r.chosen = chosen;
        r.rejected = rejected;
        r.chosen_raw = raw;
        r.noise_step = config.noise_steps;
        r.iteration = iteration;
        records.push_back(validate_record(r, schedule.t_max));
        ++local.records;
    };

    if (chosen_des) {
        emit(triplet.q_des, QuestionKind::Descriptive, *chosen_des, *y_des, *rej_des);
    }
    if (chosen_gen) {
        emit(triplet.q_gen_sq, QuestionKind::Generated, *chosen_gen, *y_gen, *rej_gen);
    }

    if (stats) {
        *stats += local;
    }
    return records;
}

std::vector<PreferenceRecord> build_preference_dataset(
    Backend& backend, ImageStore& store, const std::vector<QuestionTriplet>& triplets,
    const NoiseSchedule& schedule, const EvolutionConfig& config, int iteration,
    PairBuildStats* stats, int workers) {
    std::vector<const ImageRecord*> images;
    images.reserve(triplets.size());
    for (const QuestionTriplet& t : triplets) {
        images.push_back(&store.get(t.image_id));
    }

    std::vector<std::vector<PreferenceRecord>> per_triplet(triplets.size());
    std::vector<PairBuildStats> per_stats(triplets.size());
    auto process = [&](size_t index) {
        per_triplet[index] = build_preference_pairs(backend, *images[index], triplets[index],
                                                    schedule, config, iteration,
                                                    &per_stats[index]);
    };

    if (workers <= 1 || triplets.size() <= 1) {
        for (size_t i = 0; i < triplets.size(); ++i) {
            process(i);
        }
    } else {
        size_t n_workers = std::min<size_t>(workers, triplets.size());
        std::vector<std::thread> pool;
        std::exception_ptr first_error;
        std::mutex error_mutex;
        for (size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&, w]() {
                try {
                    for (size_t i = w; i < triplets.size(); i += n_workers) {
                        process(i);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                }
            });
        }
        for (std::thread& t : pool) {
            t.join();
        }
        if (first_error) {
            std::rethrow_exception(first_error);
        }
    }

    std::vector<PreferenceRecord> out;
    for (size_t i = 0; i < triplets.size(); ++i) {
        for (PreferenceRecord& r : per_triplet[i]) {
            out.push_back(std::move(r));
        }
        if (stats) {
            *stats += per_stats[i];
        }
    }
    return out;
}

}  // namespace sena
