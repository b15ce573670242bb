// Command-line front end over the shared-library API. Everything here goes
// through sena.h; the C++ core is deliberately out of reach.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <sena/sena.h>

namespace {

void check(sena_status status) {
    if (status != SENA_OK) {
        std::fprintf(stderr, "error (%s): %s\n", sena_status_name(status), sena_last_error());
        std::exit(1);
    }
}

struct ConfigHandle {
    sena_config* ptr = nullptr;
    ~ConfigHandle() { sena_config_free(ptr); }
};

// Loads --config when given, else starts from defaults, then applies
// key=value overrides in order.
void open_config(ConfigHandle& handle, const std::string& config_path,
                 const std::vector<std::string>& overrides) {
    if (config_path.empty()) {
        handle.ptr = sena_config_create();
    } else {
        check(sena_config_load(config_path.c_str(), &handle.ptr));
    }
    for (const std::string& entry : overrides) {
        auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::fprintf(stderr, "error: override '%s' is not of the form key=value\n",
                         entry.c_str());
            std::exit(1);
        }
        check(sena_config_set(handle.ptr, entry.substr(0, eq).c_str(),
                              entry.substr(eq + 1).c_str()));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-evolving preference-training pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sena_version()));

    std::string config_path;
    std::vector<std::string> overrides;
    std::string images_dir, out_path, triplets_path, dataset_path, run_dir;
    std::string responses_path, annotations_path, vocabulary_path, report_path;
    std::string image_path;
    uint64_t seed = 0;
    bool seed_given = false;
    int iteration = 1, workers = 0, noise_step = -1;
    bool resume = false;

    auto add_common = [&](CLI::App* cmd, const char* config_flag) {
        cmd->add_option(config_flag, config_path, "Config file (JSON)");
        cmd->add_option("--set", overrides, "Override a config key, e.g. run.seed=7")
            ->take_all();
    };

    auto* gen_q = app.add_subcommand("generate-questions",
                                     "Build question triplets for an image database");
    add_common(gen_q, "--config");
    gen_q->add_option("--images", images_dir, "Image directory or JSONL manifest");
    gen_q->add_option("--out", out_path, "Output triplet file")->required();
    gen_q->add_option("--seed", seed, "Run seed")->each([&](const std::string&) {
        seed_given = true;
    });
    gen_q->add_option("--workers", workers, "Parallel workers");

    auto* gen_p = app.add_subcommand("generate-preferences",
                                     "Build preference records from a triplet file");
    add_common(gen_p, "--backend,--config");
    gen_p->add_option("--triplets", triplets_path, "Triplet file")->required();
    gen_p->add_option("--iteration", iteration, "Iteration index the records belong to");
    gen_p->add_option("--out", out_path, "Output dataset file")->required();
    gen_p->add_option("--workers", workers, "Parallel workers");

    auto* corrupt = app.add_subcommand("corrupt", "Apply forward-diffusion noise to one image");
    add_common(corrupt, "--config");
    corrupt->add_option("--image", image_path, "Input image (.senar/.pgm/.ppm)")->required();
    corrupt->add_option("--t", noise_step, "Noise step")->required();
    corrupt->add_option("--seed", seed, "Run seed")->each([&](const std::string&) {
        seed_given = true;
    });
    corrupt->add_option("--out", out_path, "Output raw array path")->required();

    auto* train = app.add_subcommand("train", "One training pass over a preference dataset");
    add_common(train, "--backend,--config");
    train->add_option("--dataset", dataset_path, "Preference dataset file")->required();
    train->add_option("--iteration", iteration, "Iteration index");
    train->add_option("--out", out_path, "Checkpoint output directory")->required();

    auto* eval = app.add_subcommand("eval-metrics",
                                    "Hallucination metrics for responses vs annotations");
    eval->add_option("--responses", responses_path, "JSONL response file")->required();
    eval->add_option("--annotations", annotations_path, "JSONL annotation file")->required();
    eval->add_option("--vocabulary", vocabulary_path, "Object vocabulary, one entry per line");
    eval->add_option("--out", report_path, "Per-response report output (JSONL)");

    auto* evolve = app.add_subcommand("evolve", "Run the full evolution pipeline");
    add_common(evolve, "--config");
    evolve->add_option("--run-dir", run_dir, "Resumable run directory")->required();
    evolve->add_flag("--resume", resume, "Continue an existing run directory");
    evolve->add_option("--workers", workers, "Parallel workers");

    CLI11_PARSE(app, argc, argv);

    ConfigHandle cfg;
    if (app.got_subcommand(eval)) {
        sena_corpus_metrics corpus;
        check(sena_eval_metrics(responses_path.c_str(), annotations_path.c_str(),
                                vocabulary_path.empty() ? nullptr : vocabulary_path.c_str(),
                                report_path.empty() ? nullptr : report_path.c_str(), &corpus));
        std::printf("responses %zu  chair %.6f  cover %.6f  hal %.6f  cog %.6f\n",
                    corpus.responses, corpus.chair, corpus.cover, corpus.hal, corpus.cog);
        return 0;
    }

    open_config(cfg, config_path, overrides);
    if (seed_given) {
        check(sena_config_set(cfg.ptr, "run.seed", std::to_string(seed).c_str()));
    }

    if (app.got_subcommand(gen_q)) {
        if (!images_dir.empty()) {
            check(sena_config_set(cfg.ptr, "data.images", images_dir.c_str()));
        }
        size_t count = 0;
        check(sena_generate_questions(cfg.ptr, out_path.c_str(), workers, &count));
        std::printf("wrote %zu triplets to %s\n", count, out_path.c_str());
    } else if (app.got_subcommand(gen_p)) {
        sena_pair_stats stats{};
        check(sena_generate_preferences(cfg.ptr, triplets_path.c_str(), iteration,
                                        out_path.c_str(), workers, &stats));
        std::printf("wrote %zu records to %s (degenerate %zu, failures %zu, se fallbacks %zu)\n",
                    stats.records, out_path.c_str(), stats.degenerate_dropped,
                    stats.generation_failures, stats.se_fallbacks);
    } else if (app.got_subcommand(corrupt)) {
        check(sena_corrupt_file(cfg.ptr, image_path.c_str(), noise_step, out_path.c_str()));
        std::printf("wrote noisy array to %s\n", out_path.c_str());
    } else if (app.got_subcommand(train)) {
        check(sena_train(cfg.ptr, dataset_path.c_str(), iteration, out_path.c_str()));
        std::printf("wrote checkpoint and telemetry to %s\n", out_path.c_str());
    } else if (app.got_subcommand(evolve)) {
        sena_evolve_result result{};
        check(sena_evolve(cfg.ptr, run_dir.c_str(), resume ? 1 : 0, workers, -1, &result));
        std::printf("completed %d iterations; final checkpoint %s\n",
                    result.completed_iterations, result.final_checkpoint);
    }
    return 0;
}
