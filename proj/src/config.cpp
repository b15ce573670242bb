#include "config.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "util.hpp"

namespace sena {

using ordered_json = nlohmann::ordered_json;

static void require(bool cond, const std::string& message) {
    if (!cond) {
        throw Error(ErrorCode::InvalidArgument, "config: " + message);
    }
}

void EvolutionConfig::validate() const {
    require(iterations >= 1, "evolution.iterations must be >= 1");
    require(images_per_iteration >= 1, "evolution.images_per_iteration must be >= 1");
    require(noise_steps >= 1 && noise_steps <= schedule_t_max,
            "corruption.noise_steps must be in [1, corruption.t_max]");
    require(schedule_t_max >= 1, "corruption.t_max must be >= 1");
    require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
            "corruption betas must satisfy 0 < beta_start <= beta_end < 1");
    require(dpo_beta > 0.0, "training.dpo_beta must be > 0");
    require(std::isfinite(learning_rate) && learning_rate > 0.0,
            "training.learning_rate must be > 0");
    require(batch_size >= 1, "training.batch_size must be >= 1");
    require(epochs_per_iteration >= 0, "training.epochs_per_iteration must be >= 0");
    require(optimizer == "adam", "training.optimizer: only 'adam' is implemented");
    require(precision == "double", "training.precision: only 'double' is implemented");
    require(align_weight >= 0.0, "training.align_weight must be >= 0");
    require(pairs_on_descriptive || pairs_on_generated,
            "answers: at least one of pairs_on_descriptive/pairs_on_generated must be true");
    require(!prompts.p_base.empty(), "prompts.p_base must be non-empty");
    require(prompts.p_sq.find("{q}") != std::string::npos,
            "prompts.p_sq must contain the {q} placeholder");
    for (const char* ph : {"{description}", "{question}", "{answer}"}) {
        require(prompts.p_se.find(ph) != std::string::npos,
                std::string("prompts.p_se must contain the ") + ph + " placeholder");
    }
    require(!prompts.descriptive.empty(), "prompts.descriptive must be non-empty");
    require(backend.kind == "toy" || backend.kind == "mock" || backend.kind == "hybrid" ||
                backend.kind == "external",
            "backend.kind must be one of toy|mock|hybrid|external");
    if (backend.kind == "mock" || backend.kind == "hybrid") {
        require(!backend.script.empty(), "backend.script required for mock/hybrid backends");
    }
    if (backend.kind == "external") {
        require(!backend.adapter.empty(), "backend.adapter required for external backends");
    }
    require(backend.vocab_size >= 2 && backend.vocab_size <= 64,
            "backend.vocab_size must be in [2, 64]");
    require(backend.embed_dim >= 1 && backend.hidden_dim >= 1 && backend.max_gen_len >= 1,
            "backend dimensions must be >= 1");
}

static ordered_json to_json(const EvolutionConfig& c) {
    ordered_json j;
    j["run"]["seed"] = c.seed;
    j["evolution"]["iterations"] = c.iterations;
    j["evolution"]["images_per_iteration"] = c.images_per_iteration;
    j["corruption"]["noise_steps"] = c.noise_steps;
    j["corruption"]["t_max"] = c.schedule_t_max;
    j["corruption"]["beta_start"] = c.beta_start;
    j["corruption"]["beta_end"] = c.beta_end;
    j["corruption"]["clamp_noisy"] = c.clamp_noisy;
    j["training"]["dpo_beta"] = c.dpo_beta;
    j["training"]["learning_rate"] = c.learning_rate;
    j["training"]["batch_size"] = c.batch_size;
    j["training"]["epochs_per_iteration"] = c.epochs_per_iteration;
    j["training"]["optimizer"] = c.optimizer;
    j["training"]["adam_beta1"] = c.adam_beta1;
    j["training"]["adam_beta2"] = c.adam_beta2;
    j["training"]["adam_eps"] = c.adam_eps;
    j["training"]["precision"] = c.precision;
    j["training"]["align_weight"] = c.align_weight;
    j["training"]["align_on_descriptive"] = c.align_on_descriptive;
    j["training"]["align_on_generated"] = c.align_on_generated;
    j["answers"]["se_on_descriptive"] = c.se_on_descriptive;
    j["answers"]["se_on_generated"] = c.se_on_generated;
    j["answers"]["se_dedup_description"] = c.se_dedup_description;
    j["answers"]["pairs_on_descriptive"] = c.pairs_on_descriptive;
    j["answers"]["pairs_on_generated"] = c.pairs_on_generated;
    j["prompts"]["p_base"] = c.prompts.p_base;
    j["prompts"]["p_sq"] = c.prompts.p_sq;
    j["prompts"]["p_sq_followup"] = c.prompts.p_sq_followup;
    j["prompts"]["p_se"] = c.prompts.p_se;
    j["prompts"]["p_se_self"] = c.prompts.p_se_self;
    j["prompts"]["descriptive"] = c.prompts.descriptive;
    j["backend"]["kind"] = c.backend.kind;
    j["backend"]["script"] = c.backend.script;
    j["backend"]["adapter"] = c.backend.adapter;
    j["backend"]["seed"] = c.backend.seed;
    j["backend"]["vocab_size"] = c.backend.vocab_size;
    j["backend"]["embed_dim"] = c.backend.embed_dim;
    j["backend"]["hidden_dim"] = c.backend.hidden_dim;
    j["backend"]["max_gen_len"] = c.backend.max_gen_len;
    j["data"]["images"] = c.image_database;
    return j;
}

template <typename T>
static void fetch(const ordered_json& j, const char* section, const char* key, T& out) {
    if (j.contains(section) && j.at(section).contains(key)) {
        try {
            j.at(section).at(key).get_to(out);
        } catch (const ordered_json::exception& e) {
            throw Error(ErrorCode::Parse,
                        std::string("config key ") + section + "." + key + ": " + e.what());
        }
    }
}

static EvolutionConfig from_json(const ordered_json& j) {
    EvolutionConfig c;
    fetch(j, "run", "seed", c.seed);
    fetch(j, "evolution", "iterations", c.iterations);
    fetch(j, "evolution", "images_per_iteration", c.images_per_iteration);
    fetch(j, "corruption", "noise_steps", c.noise_steps);
    fetch(j, "corruption", "t_max", c.schedule_t_max);
    fetch(j, "corruption", "beta_start", c.beta_start);
    fetch(j, "corruption", "beta_end", c.beta_end);
    fetch(j, "corruption", "clamp_noisy", c.clamp_noisy);
    fetch(j, "training", "dpo_beta", c.dpo_beta);
    fetch(j, "training", "learning_rate", c.learning_rate);
    fetch(j, "training", "batch_size", c.batch_size);
    fetch(j, "training", "epochs_per_iteration", c.epochs_per_iteration);
    fetch(j, "training", "optimizer", c.optimizer);
    fetch(j, "training", "adam_beta1", c.adam_beta1);
    fetch(j, "training", "adam_beta2", c.adam_beta2);
    fetch(j, "training", "adam_eps", c.adam_eps);
    fetch(j, "training", "precision", c.precision);
    fetch(j, "training", "align_weight", c.align_weight);
    fetch(j, "training", "align_on_descriptive", c.align_on_descriptive);
    fetch(j, "training", "align_on_generated", c.align_on_generated);
    fetch(j, "answers", "se_on_descriptive", c.se_on_descriptive);
    fetch(j, "answers", "se_on_generated", c.se_on_generated);
    fetch(j, "answers", "se_dedup_description", c.se_dedup_description);
    fetch(j, "answers", "pairs_on_descriptive", c.pairs_on_descriptive);
    fetch(j, "answers", "pairs_on_generated", c.pairs_on_generated);
    fetch(j, "prompts", "p_base", c.prompts.p_base);
    fetch(j, "prompts", "p_sq", c.prompts.p_sq);
    fetch(j, "prompts", "p_sq_followup", c.prompts.p_sq_followup);
    fetch(j, "prompts", "p_se", c.prompts.p_se);
    fetch(j, "prompts", "p_se_self", c.prompts.p_se_self);
    fetch(j, "prompts", "descriptive", c.prompts.descriptive);
    fetch(j, "backend", "kind", c.backend.kind);
    fetch(j, "backend", "script", c.backend.script);
    fetch(j, "backend", "adapter", c.backend.adapter);
    fetch(j, "backend", "seed", c.backend.seed);
    fetch(j, "backend", "vocab_size", c.backend.vocab_size);
    fetch(j, "backend", "embed_dim", c.backend.embed_dim);
    fetch(j, "backend", "hidden_dim", c.backend.hidden_dim);
    fetch(j, "backend", "max_gen_len", c.backend.max_gen_len);
    fetch(j, "data", "images", c.image_database);
    return c;
}

std::string EvolutionConfig::to_json_string() const {
    return to_json(*this).dump(2) + "\n";
}

EvolutionConfig EvolutionConfig::from_json_string(const std::string& text) {
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(ErrorCode::Parse, "config is not a JSON object");
    }
    return from_json(j);
}

EvolutionConfig EvolutionConfig::load(const std::filesystem::path& path) {
    return from_json_string(read_text_file(path));
}

void EvolutionConfig::save(const std::filesystem::path& path) const {
    atomic_write_file(path, to_json_string());
}

void EvolutionConfig::set_key(const std::string& dotted_key, const std::string& value) {
    auto dot = dotted_key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= dotted_key.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "config key must have the form section.key, got '" + dotted_key + "'");
    }
    ordered_json j = to_json(*this);
    std::string section = dotted_key.substr(0, dot);
    std::string key = dotted_key.substr(dot + 1);
    if (!j.contains(section) || !j.at(section).contains(key)) {
        throw Error(ErrorCode::InvalidArgument, "unknown config key '" + dotted_key + "'");
    }
    ordered_json parsed = ordered_json::parse(value, nullptr, false);
    if (parsed.is_discarded()) {
        parsed = value;  // bare strings may be given unquoted
    }
    const ordered_json& current = j.at(section).at(key);
    if (current.is_string() && !parsed.is_string()) {
        parsed = value;
    }
    j[section][key] = parsed;
    *this = from_json(j);
}

std::string EvolutionConfig::get_key(const std::string& dotted_key) const {
    auto dot = dotted_key.find('.');
    if (dot == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument,
                    "config key must have the form section.key, got '" + dotted_key + "'");
    }
    ordered_json j = to_json(*this);
    std::string section = dotted_key.substr(0, dot);
    std::string key = dotted_key.substr(dot + 1);
    if (!j.contains(section) || !j.at(section).contains(key)) {
        throw Error(ErrorCode::InvalidArgument, "unknown config key '" + dotted_key + "'");
    }
    const ordered_json& value = j.at(section).at(key);
    if (value.is_string()) {
        return value.get<std::string>();
    }
    return value.dump();
}

}  // namespace sena
