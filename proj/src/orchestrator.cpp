#include "orchestrator.hpp"

#include <algorithm>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "answer_gen.hpp"
#include "corruption.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "image_io.hpp"
#include "question_gen.hpp"
#include "rng.hpp"
#include "trainer.hpp"
#include "util.hpp"

namespace sena {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<std::vector<std::string>> sample_images(const std::vector<std::string>& ids, int n,
                                                    int m, uint64_t seed) {
    if (n < 1 || m < 1) {
        throw Error(ErrorCode::InvalidArgument, "partition counts must be >= 1");
    }
    size_t need = static_cast<size_t>(n) * static_cast<size_t>(m);
    if (ids.size() < need) {
        throw Error(ErrorCode::InsufficientImages,
                    "database holds " + std::to_string(ids.size()) + " images, need " +
                        std::to_string(need));
    }
    std::vector<std::string> pool = ids;
    std::sort(pool.begin(), pool.end());
    Rng rng = make_rng(seed, "sample");
    std::shuffle(pool.begin(), pool.end(), rng);

    std::vector<std::vector<std::string>> partitions(n);
    size_t next = 0;
    for (int i = 0; i < n; ++i) {
        partitions[i].assign(pool.begin() + next, pool.begin() + next + m);
        next += m;
    }
    return partitions;
}

namespace {

struct RunState {
    fs::path dir;
    ordered_json manifest;

    fs::path manifest_path() const { return dir / "manifest.json"; }

    bool has_stage(const std::string& name) const {
        return manifest.contains("stages") && manifest.at("stages").contains(name);
    }

    const ordered_json& stage(const std::string& name) const {
        return manifest.at("stages").at(name);
    }

    void save() const { atomic_write_file(manifest_path(), manifest.dump(2) + "\n"); }

    void record_stage(const std::string& name, ordered_json info) {
        manifest["stages"][name] = std::move(info);
        manifest["completed"].push_back(name);
        save();
    }
};

ordered_json artifact_entry(const fs::path& dir, const std::string& relative) {
    ordered_json a;
    a["file"] = relative;
    a["sha256"] = sha256_file_hex(dir / relative);
    return a;
}

void verify_stage_artifacts(const RunState& state, const std::string& name) {
    for (const auto& artifact : state.stage(name).at("artifacts")) {
        std::string relative = artifact.at("file").get<std::string>();
        std::string expected = artifact.at("sha256").get<std::string>();
        fs::path path = state.dir / relative;
        if (!fs::exists(path)) {
            throw Error(ErrorCode::InvariantViolation,
                        "stage '" + name + "' is marked complete but '" + relative +
                            "' is missing");
        }
        std::string actual = sha256_file_hex(path);
        if (actual != expected) {
            throw Error(ErrorCode::InvariantViolation,
                        "artifact '" + relative + "' changed since stage '" + name +
                            "' completed (expected sha256 " + expected + ", found " + actual +
                            ")");
        }
    }
}

int env_workers() {
    const char* env = std::getenv("SENA_WORKERS");
    if (!env) {
        return 1;
    }
    int value = std::atoi(env);
    return value > 0 ? value : 1;
}

}  // namespace

EvolveResult evolve(const EvolutionConfig& config, const fs::path& run_dir,
                    const EvolveOptions& options) {
    config.validate();
    if (config.image_database.empty()) {
        throw Error(ErrorCode::InvalidArgument, "data.images must point at an image database");
    }
    int workers = options.workers > 0 ? options.workers : env_workers();

    fs::create_directories(run_dir);
    std::string config_text = config.to_json_string();
    fs::path config_path = run_dir / "config.json";
    if (fs::exists(config_path)) {
        if (read_text_file(config_path) != config_text) {
            throw Error(ErrorCode::InvalidArgument,
                        "run directory was created with a different config; refusing to mix");
        }
    } else {
        atomic_write_file(config_path, config_text);
    }

    // Stage order is fixed; a manifest claiming a later stage without every
    // earlier one is corrupt.
    std::vector<std::string> stage_order = {"sample", "questions"};
    for (int i = 1; i <= config.iterations; ++i) {
        stage_order.push_back("dataset_" + std::to_string(i));
        stage_order.push_back("train_" + std::to_string(i));
    }

    RunState state{run_dir, {}};
    if (fs::exists(state.manifest_path())) {
        state.manifest = ordered_json::parse(read_text_file(state.manifest_path()), nullptr,
                                             false);
        if (state.manifest.is_discarded() || !state.manifest.is_object()) {
            throw Error(ErrorCode::Parse, "manifest.json is not a JSON object");
        }
        if (state.manifest.value("config_sha256", "") != sha256_hex(config_text)) {
            throw Error(ErrorCode::InvalidArgument,
                        "manifest config hash does not match the supplied config");
        }
        bool incomplete_seen = false;
        for (const std::string& name : stage_order) {
            if (!state.has_stage(name)) {
                incomplete_seen = true;
            } else if (incomplete_seen) {
                throw Error(ErrorCode::InvariantViolation,
                            "manifest records stage '" + name +
                                "' but an earlier stage is missing");
            } else {
                verify_stage_artifacts(state, name);
            }
        }
    } else {
        state.manifest["format"] = "sena-run-v1";
        state.manifest["run_seed"] = config.seed;
        state.manifest["config_sha256"] = sha256_hex(config_text);
        state.manifest["stages"] = ordered_json::object();
        state.manifest["completed"] = ordered_json::array();
        state.save();
    }

    std::shared_ptr<Backend> backend = options.backend ? options.backend : make_backend(config);
    auto trainable = std::dynamic_pointer_cast<TrainableBackend>(backend);
    bool any_training_done = false;
    for (int i = 1; i <= config.iterations; ++i) {
        if (state.has_stage("train_" + std::to_string(i))) {
            any_training_done = true;
        }
    }
    if (trainable) {
        std::string digest = trainable->params_digest();
        if (!state.manifest.contains("initial_params_sha256")) {
            state.manifest["initial_params_sha256"] = digest;
            state.save();
        } else if (!any_training_done &&
                   state.manifest.at("initial_params_sha256").get<std::string>() != digest) {
            throw Error(ErrorCode::InvariantViolation,
                        "backend parameters do not match the run's initial state");
        }
    }

    ImageStore store = ImageStore::from_path(config.image_database);
    NoiseSchedule schedule =
        build_noise_schedule(config.schedule_t_max, config.beta_start, config.beta_end);

    EvolveResult result;
    result.run_dir = run_dir;
    result.manifest_path = state.manifest_path();

    int stages_seen = 0;
    auto stop_requested = [&]() {
        ++stages_seen;
        return options.stop_after_stages >= 0 && stages_seen >= options.stop_after_stages;
    };

    // Stage: image sampling.
    std::vector<std::vector<std::string>> partitions;
    fs::path samples_path = run_dir / "samples.json";
    if (state.has_stage("sample")) {
        ordered_json sj = ordered_json::parse(read_text_file(samples_path));
        partitions = sj.at("partitions").get<std::vector<std::vector<std::string>>>();
    } else {
        partitions = sample_images(store.ids(), config.iterations, config.images_per_iteration,
                                   config.seed);
        ordered_json sj;
        sj["partitions"] = partitions;
        atomic_write_file(samples_path, sj.dump(2) + "\n");
        ordered_json info;
        info["artifacts"] = ordered_json::array({artifact_entry(run_dir, "samples.json")});
        info["images"] = config.iterations * config.images_per_iteration;
        state.record_stage("sample", std::move(info));
        log_info("sampled " + std::to_string(config.iterations) + " x " +
                 std::to_string(config.images_per_iteration) + " images");
    }
    if (stop_requested()) {
        result.stopped_early = true;
        return result;
    }

    std::vector<std::string> all_ids;
    for (const auto& part : partitions) {
        all_ids.insert(all_ids.end(), part.begin(), part.end());
    }

    // Stage: question triplets for every sampled image, before any training
    // touches the model.
    std::vector<QuestionTriplet> triplets;
    fs::path triplets_path = run_dir / "triplets.jsonl";
    if (state.has_stage("questions")) {
        triplets = read_triplets(triplets_path);
        if (triplets.size() != all_ids.size()) {
            throw Error(ErrorCode::InvariantViolation,
                        "triplet file holds " + std::to_string(triplets.size()) +
                            " entries, expected " + std::to_string(all_ids.size()));
        }
    } else {
        triplets = build_triplets(*backend, store, all_ids, config.prompts, config.seed, workers);
        write_triplets(triplets, triplets_path);
        ordered_json info;
        info["artifacts"] = ordered_json::array({artifact_entry(run_dir, "triplets.jsonl")});
        info["triplets"] = triplets.size();
        size_t regenerated = 0;
        for (const QuestionTriplet& t : triplets) {
            regenerated += t.sq_regenerated ? 1 : 0;
        }
        info["sq_regenerated"] = regenerated;
        state.record_stage("questions", std::move(info));
        log_info("built " + std::to_string(triplets.size()) + " question triplets");
    }
    if (stop_requested()) {
        result.stopped_early = true;
        return result;
    }

    for (int i = 1; i <= config.iterations; ++i) {
        const auto m = static_cast<std::ptrdiff_t>(config.images_per_iteration);
        std::vector<QuestionTriplet> slice(triplets.begin() + (i - 1) * m,
                                           triplets.begin() + i * m);

        std::string suffix = "_iter" + std::to_string(i);
        std::string dataset_stage = "dataset_" + std::to_string(i);
        fs::path dataset_path = run_dir / ("dataset" + suffix + ".jsonl");
        std::vector<PreferenceRecord> records;
        if (state.has_stage(dataset_stage)) {
            records = read_dataset(dataset_path);
        } else {
            PairBuildStats stats;
            records = build_preference_dataset(*backend, store, slice, schedule, config, i,
                                               &stats, workers);
            if (records.empty()) {
                throw Error(ErrorCode::EmptyDataset,
                            "iteration " + std::to_string(i) +
                                " produced no usable preference records");
            }
            write_dataset(records, dataset_path);
            ordered_json info;
            info["artifacts"] =
                ordered_json::array({artifact_entry(run_dir, dataset_path.filename().string())});
            info["records"] = stats.records;
            info["degenerate_dropped"] = stats.degenerate_dropped;
            info["generation_failures"] = stats.generation_failures;
            info["se_fallbacks"] = stats.se_fallbacks;
            state.record_stage(dataset_stage, std::move(info));
            log_info("iteration " + std::to_string(i) + ": " + std::to_string(records.size()) +
                     " preference records");
        }
        if (stop_requested()) {
            result.stopped_early = true;
            return result;
        }

        std::string train_stage = "train_" + std::to_string(i);
        fs::path checkpoint_path = run_dir / ("checkpoint" + suffix + ".bin");
        fs::path telemetry_path = run_dir / ("telemetry" + suffix + ".jsonl");
        if (!trainable) {
            throw Error(ErrorCode::BackendFailure,
                        "backend kind '" + config.backend.kind +
                            "' cannot train; evolve needs a trainable backend");
        }
        if (state.has_stage(train_stage)) {
            trainable->load_params(checkpoint_path);
        } else {
            TrainResult train = train_iteration(*trainable, records, store, config, i);
            trainable->save_params(checkpoint_path);
            write_telemetry(telemetry_path, train.telemetry);
            ordered_json info;
            info["artifacts"] = ordered_json::array(
                {artifact_entry(run_dir, checkpoint_path.filename().string()),
                 artifact_entry(run_dir, telemetry_path.filename().string())});
            info["steps"] = train.telemetry.size();
            info["ref_params_sha256"] = train.ref_digest;
            info["trained_params_sha256"] = train.trained_digest;
            state.record_stage(train_stage, std::move(info));
            log_info("iteration " + std::to_string(i) + ": trained for " +
                     std::to_string(train.telemetry.size()) + " steps");
        }
        result.completed_iterations = i;
        result.final_checkpoint = checkpoint_path;
        if (stop_requested() && i < config.iterations) {
            result.stopped_early = true;
            return result;
        }
    }

    return result;
}

}  // namespace sena
