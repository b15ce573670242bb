#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sena {

// Prompt wording for the generation stages. p_base matches the published
// wording; the check/enhance templates and the descriptive list are sensible
// defaults and fully overridable through the config file.
struct PromptSet {
    std::string p_base =
        "Please look at the image and generate a question related to the content of the image.";
    // {q} is replaced with the question under check.
    std::string p_sq =
        "Look at the image and the question: '{q}'. Can this question be answered based only on "
        "the image content? Answer 'Yes' or 'No'. If 'No', write one new question that can be "
        "answered from the image.";
    // Follow-up turn used when a 'No' verdict carries no replacement question.
    std::string p_sq_followup =
        "Please write one new question that can be answered from the image.";
    // {description}, {question} and {answer} are replaced per call.
    std::string p_se =
        "Image description: {description}. Question: {question}. Previous answer: {answer}. "
        "Using the description, improve the answer: make it accurate and complete.";
    // Variant without the description slot, used for the self-referential
    // enhancement of the descriptive answer when se_dedup_description is set.
    std::string p_se_self =
        "Question: {question}. Previous answer: {answer}. Reassess the image and improve the "
        "answer: make it accurate and complete.";
    std::vector<std::string> descriptive = {
        "Describe the image concisely.",
        "Provide a brief description of the given image.",
        "Offer a succinct explanation of the picture presented.",
        "Summarize the visual content of the image.",
        "Give a short and clear explanation of the subsequent image.",
        "Share a concise interpretation of the image provided.",
        "Present a compact description of the photo's key features.",
        "Relay a brief, clear account of the picture shown.",
        "Render a clear and concise summary of the photo.",
        "Write a terse but informative summary of the picture.",
    };
};

struct BackendConfig {
    std::string kind = "toy";  // toy | mock | hybrid | external
    std::string script;        // mock/hybrid: path to the script file
    std::string adapter;       // external: registered adapter identifier
    uint64_t seed = 7;         // toy parameter initialization
    int vocab_size = 32;
    int embed_dim = 8;
    int hidden_dim = 16;
    int max_gen_len = 16;
};

struct EvolutionConfig {
    uint64_t seed = 0;

    // Evolution loop
    int iterations = 3;               // N
    int images_per_iteration = 6000;  // M

    // Forward-diffusion corruption
    int noise_steps = 600;  // T
    int schedule_t_max = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    bool clamp_noisy = false;

    // Optimization
    double dpo_beta = 0.1;
    double learning_rate = 2e-6;
    int batch_size = 128;
    int epochs_per_iteration = 1;
    std::string optimizer = "adam";
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::string precision = "double";
    double align_weight = 1.0;
    bool align_on_descriptive = true;
    bool align_on_generated = false;

    // Answer self-enhancement
    bool se_on_descriptive = true;
    bool se_on_generated = true;
    bool se_dedup_description = false;

    // Question mix: which question kinds yield preference records.
    bool pairs_on_descriptive = true;
    bool pairs_on_generated = true;

    PromptSet prompts;
    BackendConfig backend;

    // Image database: directory of images or a JSONL manifest.
    std::string image_database;

    void validate() const;

    std::string to_json_string() const;
    static EvolutionConfig from_json_string(const std::string& text);
    static EvolutionConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // Dotted-key access ("training.learning_rate", "backend.kind", ...).
    // Values are parsed from / rendered to their JSON text form.
    void set_key(const std::string& dotted_key, const std::string& value);
    std::string get_key(const std::string& dotted_key) const;
};

}  // namespace sena
