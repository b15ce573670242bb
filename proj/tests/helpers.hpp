#pragma once

// Shared fixtures for the test binaries: throwaway directories, synthetic
// images and mock-script assembly that formats prompts exactly like the
// pipeline does.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "image_io.hpp"
#include "mock_backend.hpp"
#include "rng.hpp"
#include "types.hpp"
#include "util.hpp"

namespace sena::test {

class TempDir {
public:
    TempDir() {
        static std::atomic<uint64_t> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("sena-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Deterministic image with values spread over [-1, 1], distinct per id.
inline ImageRecord make_image(const std::string& image_id, int channels = 1, int height = 4,
                              int width = 4, uint64_t salt = 0) {
    ImageRecord record;
    record.image_id = image_id;
    record.uri = "memory://" + image_id;
    record.pixels.channels = channels;
    record.pixels.height = height;
    record.pixels.width = width;
    size_t n = static_cast<size_t>(channels) * height * width;
    record.pixels.values.resize(n);
    uint64_t h = fnv1a64(image_id) ^ salt;
    for (size_t i = 0; i < n; ++i) {
        h = splitmix64(h + i);
        record.pixels.values[i] = -1.0 + 2.0 * static_cast<double>(h % 10007) / 10006.0;
    }
    return record;
}

// Writes the record's pixels as a .senar file and returns the path.
inline std::filesystem::path write_image_file(const std::filesystem::path& dir,
                                              const ImageRecord& record) {
    std::filesystem::create_directories(dir);
    auto path = dir / (record.image_id + ".senar");
    write_array(path, record.pixels);
    return path;
}

// Prompt formatting mirrors of the pipeline, used to key exact-match script
// entries.
inline std::string sq_prompt(const PromptSet& prompts, const std::string& question) {
    return replace_all(prompts.p_sq, "{q}", question);
}

inline std::string se_prompt(const PromptSet& prompts, const std::string& description,
                             const std::string& question, const std::string& answer) {
    std::string text = replace_all(prompts.p_se, "{description}", description);
    text = replace_all(text, "{question}", question);
    return replace_all(text, "{answer}", answer);
}

inline std::string se_self_prompt(const PromptSet& prompts, const std::string& question,
                                  const std::string& answer) {
    std::string text = replace_all(prompts.p_se_self, "{question}", question);
    return replace_all(text, "{answer}", answer);
}

class MockScriptBuilder {
public:
    MockScriptBuilder& exact(const std::string& image_id, bool noisy, const std::string& prompt,
                             const std::string& response) {
        MockScriptEntry entry;
        entry.image_id = image_id;
        entry.noisy = noisy;
        entry.prompt = prompt;
        entry.response = response;
        script_.entries.push_back(std::move(entry));
        return *this;
    }

    MockScriptBuilder& contains(const std::string& image_id, bool noisy,
                                const std::string& fragment, const std::string& response) {
        MockScriptEntry entry;
        entry.image_id = image_id;
        entry.noisy = noisy;
        entry.prompt_contains = fragment;
        entry.response = response;
        script_.entries.push_back(std::move(entry));
        return *this;
    }

    const MockScript& script() const { return script_; }

private:
    MockScript script_;
};

// Full answer-stage script for one image: descriptive and generated clean
// answers, noisy answers for both questions and the two enhancement passes.
// Assumes the config's default prompt templates and se flags; q_des must be
// the exact descriptive question the run will draw.
struct PipelineAnswers {
    std::string y_des = "a small dog sits on the grass";
    std::string y_gen = "the dog is brown";
    std::string y_des_noisy = "static and blur";
    std::string y_gen_noisy = "nothing clear";
    std::string y_des_enhanced = "a small brown dog sits on the green grass";
    std::string y_gen_enhanced = "the dog is brown and fluffy";
};

inline void add_answer_entries(MockScriptBuilder& builder, const PromptSet& prompts,
                               const std::string& image_id, const std::string& q_des,
                               const std::string& q_gen, const PipelineAnswers& answers) {
    builder.exact(image_id, false, q_des, answers.y_des);
    builder.exact(image_id, false, q_gen, answers.y_gen);
    builder.exact(image_id, true, q_des, answers.y_des_noisy);
    builder.exact(image_id, true, q_gen, answers.y_gen_noisy);
    builder.exact(image_id, false, se_prompt(prompts, answers.y_des, q_des, answers.y_des),
                  answers.y_des_enhanced);
    builder.exact(image_id, false, se_prompt(prompts, answers.y_des, q_gen, answers.y_gen),
                  answers.y_gen_enhanced);
}

// Question-stage script: base prompt generates q_gen, the answerability check
// approves it.
inline void add_question_entries(MockScriptBuilder& builder, const PromptSet& prompts,
                                 const std::string& image_id, const std::string& q_gen) {
    builder.exact(image_id, false, prompts.p_base, q_gen);
    builder.exact(image_id, false, sq_prompt(prompts, q_gen), "Yes");
}

}  // namespace sena::test
