#include "corruption.hpp"

#include <cmath>
#include <random>

#include "errors.hpp"

namespace sena {

NoiseSchedule build_noise_schedule(int t_max, double beta_start, double beta_end) {
    if (t_max < 1) {
        throw Error(ErrorCode::InvalidScheduleParams, "schedule length must be >= 1");
    }
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw Error(ErrorCode::InvalidScheduleParams,
                    "schedule betas must satisfy 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.t_max = t_max;
    s.betas.resize(t_max);
    s.alphas.resize(t_max);
    s.alpha_bars.resize(t_max);
    double abar = 1.0;
    for (int i = 0; i < t_max; ++i) {
        double frac = (t_max == 1) ? 0.0 : static_cast<double>(i) / (t_max - 1);
        double b = beta_start + (beta_end - beta_start) * frac;
        s.betas[i] = b;
        s.alphas[i] = 1.0 - b;
        abar *= s.alphas[i];
        s.alpha_bars[i] = abar;
        if (!(abar > 0.0)) {
            throw Error(ErrorCode::InvalidScheduleParams,
                        "cumulative signal coefficient underflowed to zero at step " +
                            std::to_string(i + 1));
        }
    }
    return s;
}

static void check_step(int t, const NoiseSchedule& schedule) {
    if (t < 0 || t > schedule.t_max) {
        throw Error(ErrorCode::StepOutOfRange,
                    "noise step " + std::to_string(t) + " outside [0, " +
                        std::to_string(schedule.t_max) + "]");
    }
}

static void check_pixels(const ImageArray& image) {
    if (image.values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "cannot corrupt an empty image");
    }
    for (double v : image.values) {
        if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
            throw Error(ErrorCode::InvalidArgument,
                        "corruption input pixels must be finite and within [-1, 1]");
        }
    }
}

static void clamp_values(ImageArray& image) {
    for (double& v : image.values) {
        v = std::min(1.0, std::max(-1.0, v));
    }
}

ImageArray corrupt_image(const ImageArray& image, int t, const NoiseSchedule& schedule, Rng& rng,
                         bool clamp) {
    check_step(t, schedule);
    check_pixels(image);
    ImageArray out = image;
    if (t == 0) {
        return out;
    }
    double abar = schedule.alpha_bar(t);
    double signal = std::sqrt(abar);
    double noise = std::sqrt(1.0 - abar);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : out.values) {
        v = signal * v + noise * gauss(rng);
    }
    if (clamp) {
        clamp_values(out);
    }
    return out;
}

ImageArray sequential_corrupt(const ImageArray& image, int t, const NoiseSchedule& schedule,
                              Rng& rng, bool clamp) {
    check_step(t, schedule);
    check_pixels(image);
    ImageArray out = image;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int s = 1; s <= t; ++s) {
        double keep = std::sqrt(1.0 - schedule.beta(s));
        double add = std::sqrt(schedule.beta(s));
        for (double& v : out.values) {
            v = keep * v + add * gauss(rng);
        }
    }
    if (clamp) {
        clamp_values(out);
    }
    return out;
}

Rng corruption_rng(uint64_t run_seed, const std::string& image_id, int t) {
    return make_rng(run_seed, "corrupt/" + image_id + "/t=" + std::to_string(t));
}

}  // namespace sena
