#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "backend.hpp"
#include "config.hpp"
#include "image_io.hpp"
#include "types.hpp"

namespace sena {

// Batch-level loss summary. l_total is always the exact sum of the other two
// terms; margin is the batch mean of the scaled log-ratio gap and
// reward_accuracy the fraction of examples where that gap is positive.
struct DpoBatchLosses {
    double l_dpo = 0.0;
    double l_align = 0.0;
    double l_total = 0.0;
    double margin = 0.0;
    double reward_accuracy = 0.0;
};

// -log sigmoid(beta * ((pol_w - ref_w) - (pol_l - ref_l))), evaluated through
// the softplus identity so it stays finite for any gap magnitude. All four
// log-likelihoods must be computed against the clean image; corruption only
// ever affects answer generation.
double dpo_loss(double pol_w, double ref_w, double pol_l, double ref_l, double beta);

// Negative mean per-token log-probability of the enhanced descriptive answer
// under the current policy.
double alignment_loss(const SequenceLikelihood& policy_likelihood_of_description);

DpoBatchLosses total_loss(const std::vector<PreferenceRecord>& batch, Backend& policy,
                          Backend& reference, ImageStore& images, const EvolutionConfig& config);

// total_loss plus accumulation of d(l_total)/d(params) into the policy's
// gradient buffer. The caller zeroes the buffer between batches.
DpoBatchLosses total_loss_with_grad(const std::vector<PreferenceRecord>& batch,
                                    TrainableBackend& policy, Backend& reference,
                                    ImageStore& images, const EvolutionConfig& config);

struct TrainStepTelemetry {
    int step = 0;
    double l_dpo = 0.0;
    double l_align = 0.0;
    double l_total = 0.0;
    double margin = 0.0;
    double reward_accuracy = 0.0;
};

struct TrainResult {
    std::vector<TrainStepTelemetry> telemetry;
    std::string ref_digest;      // parameter digest the frozen reference carries
    std::string trained_digest;  // parameter digest after the update epochs
};

// One optimization pass: snapshots the frozen reference from the incoming
// policy, then runs the configured number of epochs of shuffled mini-batch
// updates. Batch order is derived from the run seed, the iteration index and
// the epoch index only.
TrainResult train_iteration(TrainableBackend& policy, const std::vector<PreferenceRecord>& dataset,
                            ImageStore& images, const EvolutionConfig& config, int iteration);

void write_telemetry(const std::filesystem::path& path,
                     const std::vector<TrainStepTelemetry>& rows);
std::vector<TrainStepTelemetry> read_telemetry(const std::filesystem::path& path);

}  // namespace sena
