#include "question_gen.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <mutex>
#include <thread>

#include "errors.hpp"
#include "util.hpp"

namespace sena {

namespace {

bool starts_with_word(const std::string& text, const char* word) {
    size_t n = std::char_traits<char>::length(word);
    if (text.size() < n) {
        return false;
    }
    for (size_t i = 0; i < n; ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) != word[i]) {
            return false;
        }
    }
    // Word boundary: "note" must not read as a "no" verdict.
    return text.size() == n || !std::isalpha(static_cast<unsigned char>(text[n]));
}

// Remainder after a "No" verdict, with the separators between the verdict and
// any inline replacement question removed.
std::string strip_verdict_remainder(const std::string& text, size_t offset) {
    size_t pos = offset;
    while (pos < text.size()) {
        char c = text[pos];
        if (std::isspace(static_cast<unsigned char>(c)) || c == '.' || c == ',' || c == ':' ||
            c == ';' || c == '!' || c == '-') {
            ++pos;
        } else {
            break;
        }
    }
    return strip_text(text.substr(pos));
}

}  // namespace

std::string generate_question(Backend& backend, const ImageRecord& image,
                              const PromptSet& prompts) {
    ConversationContext ctx{clean_input(image), {{Role::User, prompts.p_base}}};
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            std::string q = strip_text(backend.generate(ctx));
            if (!q.empty()) {
                return q;
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyGeneration) {
                throw;
            }
        }
    }
    throw Error(ErrorCode::QuestionGenerationFailure,
                "no question produced for image '" + image.image_id + "' after one retry");
}

SqResult self_question_check(Backend& backend, const ImageRecord& image, const std::string& q_gen,
                             const PromptSet& prompts) {
    if (q_gen.empty()) {
        throw Error(ErrorCode::InvalidArgument, "cannot check an empty question");
    }
    std::string check_prompt = replace_all(prompts.p_sq, "{q}", q_gen);
    ConversationContext ctx{clean_input(image), {{Role::User, check_prompt}}};
    std::string response = strip_text(backend.generate(ctx));

    if (starts_with_word(response, "yes")) {
        return {q_gen, false};
    }
    if (!starts_with_word(response, "no")) {
        throw Error(ErrorCode::UnparseableVerdict,
                    "check response for image '" + image.image_id +
                        "' starts with neither Yes nor No: '" + response + "'");
    }
    std::string replacement = strip_verdict_remainder(response, 2);
    if (replacement.empty()) {
        ctx.turns.push_back({Role::Assistant, response});
        ctx.turns.push_back({Role::User, prompts.p_sq_followup});
        replacement = strip_text(backend.generate(ctx));
    }
    if (replacement.empty()) {
        throw Error(ErrorCode::QuestionGenerationFailure,
                    "empty replacement question for image '" + image.image_id + "'");
    }
    return {replacement, true};
}

std::string sample_descriptive_question(Rng& rng, const PromptSet& prompts) {
    if (prompts.descriptive.empty()) {
        throw Error(ErrorCode::InvalidArgument, "descriptive prompt list is empty");
    }
    std::uniform_int_distribution<size_t> dist(0, prompts.descriptive.size() - 1);
    return prompts.descriptive[dist(rng)];
}

std::vector<QuestionTriplet> build_triplets(Backend& backend, ImageStore& store,
                                            const std::vector<std::string>& ids,
                                            const PromptSet& prompts, uint64_t seed,
                                            int workers) {
    // Resolve everything up front; the worker loop then only reads.
    std::vector<const ImageRecord*> images;
    images.reserve(ids.size());
    for (const std::string& id : ids) {
        images.push_back(&store.get(id));
    }

    std::vector<QuestionTriplet> triplets(ids.size());
    auto process = [&](size_t index) {
        const ImageRecord& image = *images[index];
        std::string q_raw = generate_question(backend, image, prompts);
        SqResult sq = self_question_check(backend, image, q_raw, prompts);
        Rng rng = make_rng(seed, "questions/" + image.image_id);
        QuestionTriplet& t = triplets[index];
        t.image_id = image.image_id;
        t.uri = image.uri;
        t.q_des = sample_descriptive_question(rng, prompts);
        t.q_gen_sq = sq.question;
        t.q_gen_raw = q_raw;
        t.sq_regenerated = sq.regenerated;
    };

    if (workers <= 1 || ids.size() <= 1) {
        for (size_t i = 0; i < ids.size(); ++i) {
            process(i);
        }
        return triplets;
    }

    size_t n_workers = std::min<size_t>(workers, ids.size());
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (size_t w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (size_t i = w; i < ids.size(); i += n_workers) {
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
    return triplets;
}

}  // namespace sena
