#ifndef SENA_H
#define SENA_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SENA_API __declspec(dllexport)
#else
#define SENA_API __attribute__((visibility("default")))
#endif

/* Status codes returned by every fallible call. On failure,
 * sena_last_error() describes what went wrong in the calling thread. */
typedef enum sena_status {
    SENA_OK = 0,
    SENA_ERR_INVALID_ARGUMENT = 1,
    SENA_ERR_IO = 2,
    SENA_ERR_PARSE = 3,
    SENA_ERR_INVARIANT = 4,
    SENA_ERR_BACKEND = 5,
    SENA_ERR_EMPTY_GENERATION = 6,
    SENA_ERR_EMPTY_ANSWER = 7,
    SENA_ERR_QUESTION_GENERATION = 8,
    SENA_ERR_UNPARSEABLE_VERDICT = 9,
    SENA_ERR_INVALID_SCHEDULE = 10,
    SENA_ERR_STEP_OUT_OF_RANGE = 11,
    SENA_ERR_NONFINITE = 12,
    SENA_ERR_EMPTY_DATASET = 13,
    SENA_ERR_INSUFFICIENT_IMAGES = 14,
    SENA_ERR_EMPTY_ANNOTATION = 15,
    SENA_ERR_INTERNAL = 16,
    SENA_ERR_UNKNOWN = 17
} sena_status;

SENA_API const char* sena_status_name(sena_status status);

/* Message for the most recent failure on this thread; empty string when the
 * last call succeeded. The pointer stays valid until the next failing call
 * on the same thread. */
SENA_API const char* sena_last_error(void);

SENA_API const char* sena_version(void);

/* ---- Configuration ----------------------------------------------------- */

typedef struct sena_config sena_config;

/* All defaults; never fails. Free with sena_config_free. */
SENA_API sena_config* sena_config_create(void);
SENA_API sena_status sena_config_load(const char* path, sena_config** out);
SENA_API sena_status sena_config_save(const sena_config* config, const char* path);
/* Dotted keys, e.g. "training.learning_rate" or "backend.kind". Values are
 * given in their JSON form; bare strings may be unquoted. */
SENA_API sena_status sena_config_set(sena_config* config, const char* key, const char* value);
/* Writes the value's JSON form into buf (NUL-terminated). Fails with
 * SENA_ERR_INVALID_ARGUMENT when buf_len cannot hold it. */
SENA_API sena_status sena_config_get(const sena_config* config, const char* key, char* buf,
                                     size_t buf_len);
SENA_API sena_status sena_config_validate(const sena_config* config);
SENA_API void sena_config_free(sena_config* config);

/* ---- Backend handle ---------------------------------------------------- */

typedef struct sena_backend sena_backend;

SENA_API sena_status sena_backend_create(const sena_config* config, sena_backend** out);
/* Greedy generation for a single-prompt context. image_path may be NULL for
 * backends that ignore pixels; noisy marks post-corruption pixels. The
 * returned string is heap-allocated; release it with sena_string_free. */
SENA_API sena_status sena_backend_generate(sena_backend* backend, const char* image_id,
                                           const char* image_path, int noisy, const char* prompt,
                                           char** out_text);
SENA_API sena_status sena_backend_score(sena_backend* backend, const char* image_id,
                                        const char* image_path, const char* question,
                                        const char* answer, double* sum_logprob,
                                        double* mean_logprob, size_t* tokens);
SENA_API void sena_backend_free(sena_backend* backend);

SENA_API void sena_string_free(char* text);

/* ---- Numeric kernels --------------------------------------------------- */

/* -log sigmoid(beta * ((pol_w - ref_w) - (pol_l - ref_l))), stable form. */
SENA_API sena_status sena_dpo_loss(double pol_w, double ref_w, double pol_l, double ref_l,
                                   double beta, double* out);
/* Negative mean of the per-token log-probabilities. */
SENA_API sena_status sena_alignment_loss(const double* token_logprobs, size_t n, double* out);
/* Cumulative signal coefficient of the linear schedule at step t
 * (t = 0 yields 1). */
SENA_API sena_status sena_schedule_alpha_bar(int t_max, double beta_start, double beta_end,
                                             int t, double* out);

/* ---- Pipeline stages ---------------------------------------------------- */

/* Question triplets for every image in config's data.images, written as
 * JSON lines to out_path. workers <= 0 picks the default. */
SENA_API sena_status sena_generate_questions(const sena_config* config, const char* out_path,
                                             int workers, size_t* out_count);

typedef struct sena_pair_stats {
    size_t records;
    size_t degenerate_dropped;
    size_t generation_failures;
    size_t se_fallbacks;
} sena_pair_stats;

/* Preference records for the given iteration from a triplet file. Images
 * resolve through config's data.images when set, else through the uris
 * recorded in the triplet file. stats may be NULL. */
SENA_API sena_status sena_generate_preferences(const sena_config* config,
                                               const char* triplets_path, int iteration,
                                               const char* out_path, int workers,
                                               sena_pair_stats* stats);

/* Forward-diffusion corruption of one image file at step t, written as a raw
 * float64 array. The noise stream derives from config's run.seed and the
 * image filename. */
SENA_API sena_status sena_corrupt_file(const sena_config* config, const char* image_path, int t,
                                       const char* out_path);

/* One training pass over a preference dataset; writes checkpoint.bin and
 * telemetry.jsonl into out_dir. Requires a trainable backend kind and
 * data.images for likelihood scoring. */
SENA_API sena_status sena_train(const sena_config* config, const char* dataset_path,
                                int iteration, const char* out_dir);

typedef struct sena_corpus_metrics {
    double chair;
    double cover;
    double hal;
    double cog;
    size_t responses;
} sena_corpus_metrics;

/* Hallucination metrics for a response file against annotations. The
 * vocabulary file may be NULL, in which case the union of annotated objects
 * serves as the vocabulary. report_path may be NULL to skip the per-response
 * report; out may be NULL to skip the corpus summary. */
SENA_API sena_status sena_eval_metrics(const char* responses_path, const char* annotations_path,
                                       const char* vocabulary_path, const char* report_path,
                                       sena_corpus_metrics* out);

typedef struct sena_evolve_result {
    int completed_iterations;
    int stopped_early;
    char final_checkpoint[4096];
    char manifest[4096];
} sena_evolve_result;

/* Full evolution run over a resumable run directory. resume = 0 refuses a
 * directory that already holds a manifest. stop_after_stages < 0 runs to
 * completion. result may be NULL. */
SENA_API sena_status sena_evolve(const sena_config* config, const char* run_dir, int resume,
                                 int workers, int stop_after_stages,
                                 sena_evolve_result* result);

#ifdef __cplusplus
}
#endif

#endif /* SENA_H */
