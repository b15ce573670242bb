#include "sena/sena.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../answer_gen.hpp"
#include "../backend.hpp"
#include "../config.hpp"
#include "../corruption.hpp"
#include "../dataset.hpp"
#include "../errors.hpp"
#include "../image_io.hpp"
#include "../metrics.hpp"
#include "../orchestrator.hpp"
#include "../question_gen.hpp"
#include "../trainer.hpp"
#include "../util.hpp"

namespace {

thread_local std::string g_last_error;

sena_status map_code(sena::ErrorCode code) {
    using sena::ErrorCode;
    switch (code) {
        case ErrorCode::InvalidArgument: return SENA_ERR_INVALID_ARGUMENT;
        case ErrorCode::Io: return SENA_ERR_IO;
        case ErrorCode::Parse: return SENA_ERR_PARSE;
        case ErrorCode::InvariantViolation: return SENA_ERR_INVARIANT;
        case ErrorCode::BackendFailure: return SENA_ERR_BACKEND;
        case ErrorCode::EmptyGeneration: return SENA_ERR_EMPTY_GENERATION;
        case ErrorCode::EmptyAnswer: return SENA_ERR_EMPTY_ANSWER;
        case ErrorCode::QuestionGenerationFailure: return SENA_ERR_QUESTION_GENERATION;
        case ErrorCode::UnparseableVerdict: return SENA_ERR_UNPARSEABLE_VERDICT;
        case ErrorCode::InvalidScheduleParams: return SENA_ERR_INVALID_SCHEDULE;
        case ErrorCode::StepOutOfRange: return SENA_ERR_STEP_OUT_OF_RANGE;
        case ErrorCode::NonFiniteInput: return SENA_ERR_NONFINITE;
        case ErrorCode::EmptyDataset: return SENA_ERR_EMPTY_DATASET;
        case ErrorCode::InsufficientImages: return SENA_ERR_INSUFFICIENT_IMAGES;
        case ErrorCode::EmptyAnnotation: return SENA_ERR_EMPTY_ANNOTATION;
        case ErrorCode::Internal: return SENA_ERR_INTERNAL;
    }
    return SENA_ERR_UNKNOWN;
}

template <typename Fn>
sena_status guarded(Fn&& fn) {
    g_last_error.clear();
    try {
        fn();
        return SENA_OK;
    } catch (const sena::Error& e) {
        g_last_error = e.what();
        return map_code(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SENA_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown failure";
        return SENA_ERR_UNKNOWN;
    }
}

sena_status fail_invalid(const char* message) {
    g_last_error = message;
    return SENA_ERR_INVALID_ARGUMENT;
}

char* copy_to_c_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!out) {
        throw sena::Error(sena::ErrorCode::Internal, "allocation failure");
    }
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

void copy_path(char* dst, size_t cap, const std::filesystem::path& path) {
    std::string s = path.string();
    std::snprintf(dst, cap, "%s", s.c_str());
}

// Image store for a stage that may not have a configured database: fall back
// to the uris recorded in the triplet file.
sena::ImageStore store_for_stage(const sena::EvolutionConfig& config,
                                 const std::vector<sena::QuestionTriplet>* triplets) {
    if (!config.image_database.empty()) {
        return sena::ImageStore::from_path(config.image_database);
    }
    if (!triplets) {
        throw sena::Error(sena::ErrorCode::InvalidArgument,
                          "data.images must point at an image database");
    }
    sena::ImageStore store;
    for (const sena::QuestionTriplet& t : *triplets) {
        store.add_reference(t.image_id, t.uri);
    }
    return store;
}

}  // namespace

struct sena_config {
    sena::EvolutionConfig cfg;
};

struct sena_backend {
    std::shared_ptr<sena::Backend> backend;
};

extern "C" {

const char* sena_status_name(sena_status status) {
    switch (status) {
        case SENA_OK: return "ok";
        case SENA_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case SENA_ERR_IO: return "io";
        case SENA_ERR_PARSE: return "parse";
        case SENA_ERR_INVARIANT: return "invariant_violation";
        case SENA_ERR_BACKEND: return "backend_failure";
        case SENA_ERR_EMPTY_GENERATION: return "empty_generation";
        case SENA_ERR_EMPTY_ANSWER: return "empty_answer";
        case SENA_ERR_QUESTION_GENERATION: return "question_generation_failure";
        case SENA_ERR_UNPARSEABLE_VERDICT: return "unparseable_verdict";
        case SENA_ERR_INVALID_SCHEDULE: return "invalid_schedule_params";
        case SENA_ERR_STEP_OUT_OF_RANGE: return "step_out_of_range";
        case SENA_ERR_NONFINITE: return "non_finite_input";
        case SENA_ERR_EMPTY_DATASET: return "empty_dataset";
        case SENA_ERR_INSUFFICIENT_IMAGES: return "insufficient_images";
        case SENA_ERR_EMPTY_ANNOTATION: return "empty_annotation";
        case SENA_ERR_INTERNAL: return "internal";
        case SENA_ERR_UNKNOWN: return "unknown";
    }
    return "unknown";
}

const char* sena_last_error(void) {
    return g_last_error.c_str();
}

const char* sena_version(void) {
    return "0.1.0";
}

sena_config* sena_config_create(void) {
    return new sena_config{};
}

sena_status sena_config_load(const char* path, sena_config** out) {
    if (!path || !out) {
        return fail_invalid("path and out must be non-NULL");
    }
    return guarded([&] {
        auto handle = std::make_unique<sena_config>();
        handle->cfg = sena::EvolutionConfig::load(path);
        *out = handle.release();
    });
}

sena_status sena_config_save(const sena_config* config, const char* path) {
    if (!config || !path) {
        return fail_invalid("config and path must be non-NULL");
    }
    return guarded([&] { config->cfg.save(path); });
}

sena_status sena_config_set(sena_config* config, const char* key, const char* value) {
    if (!config || !key || !value) {
        return fail_invalid("config, key and value must be non-NULL");
    }
    return guarded([&] { config->cfg.set_key(key, value); });
}

sena_status sena_config_get(const sena_config* config, const char* key, char* buf,
                            size_t buf_len) {
    if (!config || !key || !buf || buf_len == 0) {
        return fail_invalid("config, key and a non-empty buffer are required");
    }
    return guarded([&] {
        std::string value = config->cfg.get_key(key);
        if (value.size() + 1 > buf_len) {
            throw sena::Error(sena::ErrorCode::InvalidArgument,
                              "value needs " + std::to_string(value.size() + 1) +
                                  " bytes, buffer holds " + std::to_string(buf_len));
        }
        std::memcpy(buf, value.c_str(), value.size() + 1);
    });
}

sena_status sena_config_validate(const sena_config* config) {
    if (!config) {
        return fail_invalid("config must be non-NULL");
    }
    return guarded([&] { config->cfg.validate(); });
}

void sena_config_free(sena_config* config) {
    delete config;
}

sena_status sena_backend_create(const sena_config* config, sena_backend** out) {
    if (!config || !out) {
        return fail_invalid("config and out must be non-NULL");
    }
    return guarded([&] {
        auto handle = std::make_unique<sena_backend>();
        handle->backend = sena::make_backend(config->cfg);
        *out = handle.release();
    });
}

sena_status sena_backend_generate(sena_backend* backend, const char* image_id,
                                  const char* image_path, int noisy, const char* prompt,
                                  char** out_text) {
    if (!backend || !image_id || !prompt || !out_text) {
        return fail_invalid("backend, image_id, prompt and out_text must be non-NULL");
    }
    return guarded([&] {
        sena::ImageArray pixels;
        sena::ImageRecord record;
        sena::ImageInput input{image_id, nullptr, noisy != 0};
        if (image_path) {
            if (noisy) {
                // Noisy inputs arrive as raw arrays; they may leave [-1, 1].
                pixels = sena::read_array(image_path);
                input.pixels = &pixels;
            } else {
                record = sena::load_image(image_id, image_path);
                input.pixels = &record.pixels;
            }
        }
        sena::ConversationContext ctx{input, {{sena::Role::User, prompt}}};
        *out_text = copy_to_c_string(backend->backend->generate(ctx));
    });
}

sena_status sena_backend_score(sena_backend* backend, const char* image_id,
                               const char* image_path, const char* question, const char* answer,
                               double* sum_logprob, double* mean_logprob, size_t* tokens) {
    if (!backend || !image_id || !question || !answer) {
        return fail_invalid("backend, image_id, question and answer must be non-NULL");
    }
    return guarded([&] {
        sena::ImageRecord record;
        sena::ImageInput input{image_id, nullptr, false};
        if (image_path) {
            record = sena::load_image(image_id, image_path);
            input.pixels = &record.pixels;
        }
        sena::SequenceLikelihood lik = backend->backend->score_answer(input, question, answer);
        if (sum_logprob) {
            *sum_logprob = lik.sum_logprob;
        }
        if (mean_logprob) {
            *mean_logprob = lik.mean_logprob;
        }
        if (tokens) {
            *tokens = lik.length;
        }
    });
}

void sena_backend_free(sena_backend* backend) {
    delete backend;
}

void sena_string_free(char* text) {
    std::free(text);
}

sena_status sena_dpo_loss(double pol_w, double ref_w, double pol_l, double ref_l, double beta,
                          double* out) {
    if (!out) {
        return fail_invalid("out must be non-NULL");
    }
    return guarded([&] { *out = sena::dpo_loss(pol_w, ref_w, pol_l, ref_l, beta); });
}

sena_status sena_alignment_loss(const double* token_logprobs, size_t n, double* out) {
    if (!out || (n > 0 && !token_logprobs)) {
        return fail_invalid("out must be non-NULL and token_logprobs must cover n entries");
    }
    return guarded([&] {
        std::vector<double> logprobs(token_logprobs, token_logprobs + n);
        *out = sena::alignment_loss(
            sena::SequenceLikelihood::from_token_logprobs(std::move(logprobs)));
    });
}

sena_status sena_schedule_alpha_bar(int t_max, double beta_start, double beta_end, int t,
                                    double* out) {
    if (!out) {
        return fail_invalid("out must be non-NULL");
    }
    return guarded([&] {
        sena::NoiseSchedule schedule = sena::build_noise_schedule(t_max, beta_start, beta_end);
        if (t < 0 || t > schedule.t_max) {
            throw sena::Error(sena::ErrorCode::StepOutOfRange,
                              "step " + std::to_string(t) + " outside [0, " +
                                  std::to_string(schedule.t_max) + "]");
        }
        *out = schedule.alpha_bar(t);
    });
}

sena_status sena_generate_questions(const sena_config* config, const char* out_path, int workers,
                                    size_t* out_count) {
    if (!config || !out_path) {
        return fail_invalid("config and out_path must be non-NULL");
    }
    return guarded([&] {
        const sena::EvolutionConfig& cfg = config->cfg;
        cfg.validate();
        if (cfg.image_database.empty()) {
            throw sena::Error(sena::ErrorCode::InvalidArgument,
                              "data.images must point at an image database");
        }
        sena::ImageStore store = sena::ImageStore::from_path(cfg.image_database);
        std::shared_ptr<sena::Backend> backend = sena::make_backend(cfg);
        std::vector<sena::QuestionTriplet> triplets = sena::build_triplets(
            *backend, store, store.ids(), cfg.prompts, cfg.seed, workers > 0 ? workers : 1);
        sena::write_triplets(triplets, out_path);
        if (out_count) {
            *out_count = triplets.size();
        }
    });
}

sena_status sena_generate_preferences(const sena_config* config, const char* triplets_path,
                                      int iteration, const char* out_path, int workers,
                                      sena_pair_stats* stats) {
    if (!config || !triplets_path || !out_path) {
        return fail_invalid("config, triplets_path and out_path must be non-NULL");
    }
    return guarded([&] {
        const sena::EvolutionConfig& cfg = config->cfg;
        cfg.validate();
        std::vector<sena::QuestionTriplet> triplets = sena::read_triplets(triplets_path);
        sena::ImageStore store = store_for_stage(cfg, &triplets);
        std::shared_ptr<sena::Backend> backend = sena::make_backend(cfg);
        sena::NoiseSchedule schedule =
            sena::build_noise_schedule(cfg.schedule_t_max, cfg.beta_start, cfg.beta_end);
        sena::PairBuildStats pair_stats;
        std::vector<sena::PreferenceRecord> records =
            sena::build_preference_dataset(*backend, store, triplets, schedule, cfg, iteration,
                                           &pair_stats, workers > 0 ? workers : 1);
        sena::write_dataset(records, out_path);
        if (stats) {
            stats->records = pair_stats.records;
            stats->degenerate_dropped = pair_stats.degenerate_dropped;
            stats->generation_failures = pair_stats.generation_failures;
            stats->se_fallbacks = pair_stats.se_fallbacks;
        }
    });
}

sena_status sena_corrupt_file(const sena_config* config, const char* image_path, int t,
                              const char* out_path) {
    if (!config || !image_path || !out_path) {
        return fail_invalid("config, image_path and out_path must be non-NULL");
    }
    return guarded([&] {
        const sena::EvolutionConfig& cfg = config->cfg;
        std::filesystem::path in_path(image_path);
        std::string image_id = in_path.stem().string();
        sena::ImageRecord record = sena::load_image(image_id, in_path);
        sena::NoiseSchedule schedule =
            sena::build_noise_schedule(cfg.schedule_t_max, cfg.beta_start, cfg.beta_end);
        sena::Rng rng = sena::corruption_rng(cfg.seed, image_id, t);
        sena::ImageArray noisy =
            sena::corrupt_image(record.pixels, t, schedule, rng, cfg.clamp_noisy);
        sena::write_array(out_path, noisy);
    });
}

sena_status sena_train(const sena_config* config, const char* dataset_path, int iteration,
                       const char* out_dir) {
    if (!config || !dataset_path || !out_dir) {
        return fail_invalid("config, dataset_path and out_dir must be non-NULL");
    }
    return guarded([&] {
        const sena::EvolutionConfig& cfg = config->cfg;
        cfg.validate();
        if (cfg.image_database.empty()) {
            throw sena::Error(sena::ErrorCode::InvalidArgument,
                              "data.images must point at an image database");
        }
        std::vector<sena::PreferenceRecord> records = sena::read_dataset(dataset_path);
        sena::ImageStore store = sena::ImageStore::from_path(cfg.image_database);
        std::shared_ptr<sena::Backend> backend = sena::make_backend(cfg);
        auto trainable = std::dynamic_pointer_cast<sena::TrainableBackend>(backend);
        if (!trainable) {
            throw sena::Error(sena::ErrorCode::BackendFailure,
                              "backend kind '" + cfg.backend.kind + "' cannot train");
        }
        sena::TrainResult result =
            sena::train_iteration(*trainable, records, store, cfg, iteration);
        std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        trainable->save_params(dir / "checkpoint.bin");
        sena::write_telemetry(dir / "telemetry.jsonl", result.telemetry);
    });
}

sena_status sena_eval_metrics(const char* responses_path, const char* annotations_path,
                              const char* vocabulary_path, const char* report_path,
                              sena_corpus_metrics* out) {
    if (!responses_path || !annotations_path) {
        return fail_invalid("responses_path and annotations_path must be non-NULL");
    }
    return guarded([&] {
        auto responses = sena::read_responses(responses_path);
        auto annotations = sena::read_annotations(annotations_path);
        std::map<std::string, const sena::AmberAnnotation*> by_id;
        for (const sena::AmberAnnotation& a : annotations) {
            by_id[a.image_id] = &a;
        }

        std::vector<std::string> vocabulary;
        if (vocabulary_path) {
            vocabulary = sena::read_vocabulary(vocabulary_path);
        } else {
            std::set<std::string> merged;
            for (const sena::AmberAnnotation& a : annotations) {
                merged.insert(a.existing.begin(), a.existing.end());
                merged.insert(a.hallucination_targets.begin(), a.hallucination_targets.end());
            }
            vocabulary.assign(merged.begin(), merged.end());
        }

        std::ostringstream report;
        std::vector<sena::GenerativeMetrics> per_response;
        for (const auto& [image_id, response] : responses) {
            auto it = by_id.find(image_id);
            if (it == by_id.end()) {
                throw sena::Error(sena::ErrorCode::InvalidArgument,
                                  "no annotation for image '" + image_id + "'");
            }
            std::set<std::string> objects = sena::extract_objects(response, vocabulary);
            sena::GenerativeMetrics m = sena::generative_metrics(objects, *it->second);
            per_response.push_back(m);
            nlohmann::ordered_json line;
            line["image_id"] = image_id;
            line["chair"] = m.chair;
            line["cover"] = m.cover;
            line["hal"] = m.hal;
            line["cog"] = m.cog;
            line["no_objects"] = m.no_objects;
            report << line.dump() << "\n";
        }
        sena::CorpusMetrics corpus = sena::corpus_metrics(per_response);
        nlohmann::ordered_json summary;
        summary["responses"] = corpus.responses;
        summary["chair"] = corpus.chair;
        summary["cover"] = corpus.cover;
        summary["hal"] = corpus.hal;
        summary["cog"] = corpus.cog;
        report << summary.dump() << "\n";
        if (report_path) {
            sena::atomic_write_file(report_path, report.str());
        }
        if (out) {
            out->chair = corpus.chair;
            out->cover = corpus.cover;
            out->hal = corpus.hal;
            out->cog = corpus.cog;
            out->responses = corpus.responses;
        }
    });
}

sena_status sena_evolve(const sena_config* config, const char* run_dir, int resume, int workers,
                        int stop_after_stages, sena_evolve_result* result) {
    if (!config || !run_dir) {
        return fail_invalid("config and run_dir must be non-NULL");
    }
    return guarded([&] {
        std::filesystem::path dir(run_dir);
        if (!resume && std::filesystem::exists(dir / "manifest.json")) {
            throw sena::Error(sena::ErrorCode::InvalidArgument,
                              "run directory already holds a run; pass resume to continue it");
        }
        sena::EvolveOptions options;
        options.workers = workers;
        options.stop_after_stages = stop_after_stages;
        sena::EvolveResult r = sena::evolve(config->cfg, dir, options);
        if (result) {
            result->completed_iterations = r.completed_iterations;
            result->stopped_early = r.stopped_early ? 1 : 0;
            copy_path(result->final_checkpoint, sizeof(result->final_checkpoint),
                      r.final_checkpoint);
            copy_path(result->manifest, sizeof(result->manifest), r.manifest_path);
        }
    });
}

}  // extern "C"
