#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "backend.hpp"

namespace sena {

// One scripted response. An entry fires when image_id and the noisy flag
// match and either `prompt` equals the last user turn exactly or
// `prompt_contains` is a substring of it. Exact entries win over substring
// entries; among substring entries, file order decides.
struct MockScriptEntry {
    std::string image_id;
    bool noisy = false;
    std::optional<std::string> prompt;
    std::optional<std::string> prompt_contains;
    std::string response;
};

struct MockScript {
    std::vector<MockScriptEntry> entries;

    static MockScript load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

// Deterministic scriptable backend: generation is a pure function of
// (image_id, noisy flag, last user turn); scoring is a pure hash-derived
// function of (image_id, noisy flag, question, answer). Records every call
// for contract tests.
class MockBackend : public Backend {
public:
    enum class CallKind { Generate, Score };

    struct CallRecord {
        CallKind kind;
        std::string image_id;
        bool noisy = false;
        uint64_t image_fingerprint = 0;  // hash of the pixel bytes, 0 when absent
        std::string prompt;              // last user turn (generate) or question (score)
        std::string response;            // generated text or scored answer
    };

    explicit MockBackend(MockScript script) : script_(std::move(script)) {}

    std::string generate(const ConversationContext& context) override;
    SequenceLikelihood score_answer(const ImageInput& image, const std::string& question,
                                    const std::string& answer) override;
    std::shared_ptr<Backend> snapshot() const override;

    const std::vector<CallRecord>& calls() const { return calls_; }
    void clear_calls() { calls_.clear(); }

private:
    const MockScriptEntry* find_entry(const std::string& image_id, bool noisy,
                                      const std::string& prompt) const;

    MockScript script_;
    std::vector<CallRecord> calls_;
    mutable std::mutex mutex_;
};

uint64_t image_fingerprint(const ImageInput& image);

}  // namespace sena
