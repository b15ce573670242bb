#include "mock_backend.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace sena {

MockScript MockScript::load(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("entries") ||
        !j.at("entries").is_array()) {
        throw Error(ErrorCode::Parse,
                    "mock script '" + path.string() + "' must be {\"entries\": [...]}");
    }
    MockScript script;
    for (const auto& e : j.at("entries")) {
        MockScriptEntry entry;
        entry.image_id = e.at("image_id").get<std::string>();
        entry.noisy = e.value("noisy", false);
        if (e.contains("prompt")) {
            entry.prompt = e.at("prompt").get<std::string>();
        }
        if (e.contains("prompt_contains")) {
            entry.prompt_contains = e.at("prompt_contains").get<std::string>();
        }
        if (!entry.prompt && !entry.prompt_contains) {
            throw Error(ErrorCode::Parse,
                        "mock script entry needs 'prompt' or 'prompt_contains'");
        }
        entry.response = e.at("response").get<std::string>();
        script.entries.push_back(std::move(entry));
    }
    return script;
}

void MockScript::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& entry : entries) {
        nlohmann::ordered_json e;
        e["image_id"] = entry.image_id;
        e["noisy"] = entry.noisy;
        if (entry.prompt) e["prompt"] = *entry.prompt;
        if (entry.prompt_contains) e["prompt_contains"] = *entry.prompt_contains;
        e["response"] = entry.response;
        j["entries"].push_back(std::move(e));
    }
    atomic_write_file(path, j.dump(2) + "\n");
}

uint64_t image_fingerprint(const ImageInput& image) {
    if (!image.pixels || image.pixels->values.empty()) {
        return 0;
    }
    std::string_view bytes(reinterpret_cast<const char*>(image.pixels->values.data()),
                           image.pixels->values.size() * sizeof(double));
    return fnv1a64(bytes);
}

const MockScriptEntry* MockBackend::find_entry(const std::string& image_id, bool noisy,
                                               const std::string& prompt) const {
    for (const auto& entry : script_.entries) {
        if (entry.image_id == image_id && entry.noisy == noisy && entry.prompt &&
            *entry.prompt == prompt) {
            return &entry;
        }
    }
    for (const auto& entry : script_.entries) {
        if (entry.image_id == image_id && entry.noisy == noisy && entry.prompt_contains &&
            prompt.find(*entry.prompt_contains) != std::string::npos) {
            return &entry;
        }
    }
    return nullptr;
}

std::string MockBackend::generate(const ConversationContext& context) {
    context.validate();
    const std::string& prompt = context.last_user_text();
    const MockScriptEntry* entry =
        find_entry(context.image.image_id, context.image.noisy, prompt);
    if (!entry) {
        throw Error(ErrorCode::BackendFailure,
                    "no mock script entry for image '" + context.image.image_id + "' (" +
                        (context.image.noisy ? "noisy" : "clean") + ") prompt: " + prompt);
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        calls_.push_back({CallKind::Generate, context.image.image_id, context.image.noisy,
                          sena::image_fingerprint(context.image), prompt, entry->response});
    }
    if (entry->response.empty()) {
        throw Error(ErrorCode::EmptyGeneration,
                    "scripted empty generation for image '" + context.image.image_id + "'");
    }
    return entry->response;
}

SequenceLikelihood MockBackend::score_answer(const ImageInput& image,
                                             const std::string& question,
                                             const std::string& answer) {
    std::vector<std::string> tokens = tokenize_words(answer);
    if (tokens.empty()) {
        throw Error(ErrorCode::EmptyAnswer, "answer has no tokens");
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        calls_.push_back({CallKind::Score, image.image_id, image.noisy,
                          sena::image_fingerprint(image), question, answer});
    }
    std::vector<double> logprobs;
    logprobs.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        std::ostringstream key;
        key << image.image_id << "\x1f" << image.noisy << "\x1f" << question << "\x1f"
            << tokens[i] << "\x1f" << i;
        uint64_t h = fnv1a64(key.str());
        logprobs.push_back(-(0.05 + static_cast<double>(h % 997) / 997.0 * 3.0));
    }
    return SequenceLikelihood::from_token_logprobs(std::move(logprobs));
}

std::shared_ptr<Backend> MockBackend::snapshot() const {
    // The script is immutable, so a fresh instance scores identically.
    return std::make_shared<MockBackend>(script_);
}

}  // namespace sena
