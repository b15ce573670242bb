#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "backend.hpp"
#include "config.hpp"

namespace sena {

// Uniform sample of n * m ids without replacement, split into n disjoint
// partitions of m. Partition i feeds iteration i+1 and nothing else.
std::vector<std::vector<std::string>> sample_images(const std::vector<std::string>& ids, int n,
                                                    int m, uint64_t seed);

struct EvolveOptions {
    // 0 reads SENA_WORKERS from the environment, default 1.
    int workers = 0;
    // Stop once this many stages completed (sample and question generation
    // are one stage each, every iteration adds a dataset and a train stage).
    // Lets tests cut a run short the way a crash would. -1 runs everything.
    int stop_after_stages = -1;
    // Test hook; when empty the backend comes from the config.
    std::shared_ptr<Backend> backend;
};

struct EvolveResult {
    std::filesystem::path run_dir;
    std::filesystem::path manifest_path;
    std::filesystem::path final_checkpoint;  // empty until the last iteration trains
    int completed_iterations = 0;
    bool stopped_early = false;
};

// Full pipeline over a resumable run directory: sample the image partitions,
// build all question triplets up front with the initial model, then per
// iteration generate preference data with the previous iteration's model and
// train on it. Every stage writes its artifact atomically and records its
// hash in manifest.json; re-invocation verifies and skips completed stages.
EvolveResult evolve(const EvolutionConfig& config, const std::filesystem::path& run_dir,
                    const EvolveOptions& options = {});

}  // namespace sena
