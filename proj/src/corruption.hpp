#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rng.hpp"
#include "types.hpp"

namespace sena {

// Forward-process coefficients, precomputed once per run. Index i holds the
// step-(i+1) values; alpha_bar(0) is defined as 1 so step 0 is the identity.
struct NoiseSchedule {
    int t_max = 0;
    std::vector<double> betas;
    std::vector<double> alphas;      // 1 - beta_t
    std::vector<double> alpha_bars;  // prod_{s<=t} alpha_s

    double beta(int t) const { return betas[static_cast<size_t>(t) - 1]; }
    double alpha(int t) const { return alphas[static_cast<size_t>(t) - 1]; }
    double alpha_bar(int t) const {
        return t == 0 ? 1.0 : alpha_bars[static_cast<size_t>(t) - 1];
    }
};

// Linear beta ramp from beta_start to beta_end over t_max steps.
// Throws InvalidScheduleParams unless 0 < beta_start <= beta_end < 1.
NoiseSchedule build_noise_schedule(int t_max, double beta_start, double beta_end);

// One-shot marginal draw x' = sqrt(abar_t) x + sqrt(1 - abar_t) eps.
// t = 0 returns a copy; t outside [0, t_max] throws StepOutOfRange. Output is
// unclamped by default so the Gaussian marginal survives; clamp pins values
// back into [-1, 1] for preprocessors that require it.
ImageArray corrupt_image(const ImageArray& image, int t, const NoiseSchedule& schedule, Rng& rng,
                         bool clamp = false);

// Step-by-step route x_s = sqrt(1 - beta_s) x_{s-1} + sqrt(beta_s) eps_s.
// Shares corrupt_image's marginal distribution; kept as an independent check
// of the closed form, not used in production.
ImageArray sequential_corrupt(const ImageArray& image, int t, const NoiseSchedule& schedule,
                              Rng& rng, bool clamp = false);

// Noise stream for one (image, step) work item, independent of processing
// order across images.
Rng corruption_rng(uint64_t run_seed, const std::string& image_id, int t);

}  // namespace sena
