#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace sena {

namespace {

double softplus(double a) {
    return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a)));
}

double sigmoid(double a) {
    if (a >= 0.0) {
        return 1.0 / (1.0 + std::exp(-a));
    }
    double e = std::exp(a);
    return e / (1.0 + e);
}

bool align_gated(QuestionKind kind, const EvolutionConfig& config) {
    return (kind == QuestionKind::Descriptive && config.align_on_descriptive) ||
           (kind == QuestionKind::Generated && config.align_on_generated);
}

DpoBatchLosses batch_losses(const std::vector<PreferenceRecord>& batch, Backend& policy,
                            Backend& reference, ImageStore& images,
                            const EvolutionConfig& config, TrainableBackend* grad_target) {
    if (batch.empty()) {
        throw Error(ErrorCode::EmptyDataset, "loss of an empty batch is undefined");
    }
    const double beta = config.dpo_beta;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    DpoBatchLosses out;
    size_t positive = 0;

    for (const PreferenceRecord& record : batch) {
        const ImageRecord& image = images.get(record.image_id);
        ImageInput clean = clean_input(image);

        SequenceLikelihood pol_w = policy.score_answer(clean, record.question, record.chosen);
        SequenceLikelihood pol_l = policy.score_answer(clean, record.question, record.rejected);
        SequenceLikelihood ref_w = reference.score_answer(clean, record.question, record.chosen);
        SequenceLikelihood ref_l =
            reference.score_answer(clean, record.question, record.rejected);

        double z = beta * ((pol_w.sum_logprob - ref_w.sum_logprob) -
                           (pol_l.sum_logprob - ref_l.sum_logprob));
        out.l_dpo += inv_b * dpo_loss(pol_w.sum_logprob, ref_w.sum_logprob, pol_l.sum_logprob,
                                      ref_l.sum_logprob, beta);
        out.margin += inv_b * z;
        if (z > 0.0) {
            ++positive;
        }

        bool gated = align_gated(record.question_kind, config);
        if (gated) {
            out.l_align += inv_b * config.align_weight * alignment_loss(pol_w);
        }

        if (grad_target) {
            // d softplus(-z) / d z = -sigmoid(-z); every chosen token's
            // logprob enters z with weight +beta, every rejected one with
            // -beta. The alignment term adds -lambda / (tokens * B) to each
            // chosen token of a gated record.
            double s = sigmoid(-z);
            double w_chosen = -beta * s * inv_b;
            if (gated) {
                w_chosen -= config.align_weight * inv_b / static_cast<double>(pol_w.length);
            }
            double w_rejected = beta * s * inv_b;
            std::vector<double> upstream(pol_w.length, w_chosen);
            grad_target->accumulate_answer_grad(clean, record.question, record.chosen, upstream);
            upstream.assign(pol_l.length, w_rejected);
            grad_target->accumulate_answer_grad(clean, record.question, record.rejected,
                                                upstream);
        }
    }

    out.l_total = out.l_dpo + out.l_align;
    out.reward_accuracy = static_cast<double>(positive) * inv_b;
    return out;
}

}  // namespace

double dpo_loss(double pol_w, double ref_w, double pol_l, double ref_l, double beta) {
    for (double v : {pol_w, ref_w, pol_l, ref_l, beta}) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteInput, "preference loss inputs must be finite");
        }
    }
    if (beta <= 0.0) {
        throw Error(ErrorCode::InvalidArgument, "beta must be > 0");
    }
    double z = beta * ((pol_w - ref_w) - (pol_l - ref_l));
    return softplus(-z);
}

double alignment_loss(const SequenceLikelihood& policy_likelihood_of_description) {
    if (policy_likelihood_of_description.length == 0) {
        throw Error(ErrorCode::EmptyAnswer, "alignment loss of an empty answer is undefined");
    }
    if (!std::isfinite(policy_likelihood_of_description.mean_logprob)) {
        throw Error(ErrorCode::NonFiniteInput, "alignment loss input must be finite");
    }
    return -policy_likelihood_of_description.mean_logprob;
}

DpoBatchLosses total_loss(const std::vector<PreferenceRecord>& batch, Backend& policy,
                          Backend& reference, ImageStore& images,
                          const EvolutionConfig& config) {
    return batch_losses(batch, policy, reference, images, config, nullptr);
}

DpoBatchLosses total_loss_with_grad(const std::vector<PreferenceRecord>& batch,
                                    TrainableBackend& policy, Backend& reference,
                                    ImageStore& images, const EvolutionConfig& config) {
    return batch_losses(batch, policy, reference, images, config, &policy);
}

namespace {

// Standard bias-corrected adaptive moment optimizer.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}

    void update(std::span<double> params, std::span<const double> grad,
                const EvolutionConfig& config) {
        ++step;
        double b1 = config.adam_beta1, b2 = config.adam_beta2;
        double corr1 = 1.0 - std::pow(b1, static_cast<double>(step));
        double corr2 = 1.0 - std::pow(b2, static_cast<double>(step));
        for (size_t i = 0; i < params.size(); ++i) {
            double g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            double mhat = m[i] / corr1;
            double vhat = v[i] / corr2;
            params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
        }
    }
};

}  // namespace

TrainResult train_iteration(TrainableBackend& policy,
                            const std::vector<PreferenceRecord>& dataset, ImageStore& images,
                            const EvolutionConfig& config, int iteration) {
    if (dataset.empty()) {
        throw Error(ErrorCode::EmptyDataset, "cannot train on an empty dataset");
    }
    TrainResult result;
    result.ref_digest = policy.params_digest();
    std::shared_ptr<Backend> reference = policy.snapshot();

    AdamState adam(policy.num_params());
    int global_step = 0;
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < config.epochs_per_iteration; ++epoch) {
        Rng rng = make_rng(config.seed, "train/i" + std::to_string(iteration) + "/epoch" +
                                            std::to_string(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            std::vector<PreferenceRecord> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                batch.push_back(dataset[order[i]]);
            }
            policy.zero_grad();
            DpoBatchLosses losses =
                total_loss_with_grad(batch, policy, *reference, images, config);
            adam.update(policy.params(), policy.grad(), config);
            result.telemetry.push_back({++global_step, losses.l_dpo, losses.l_align,
                                        losses.l_total, losses.margin, losses.reward_accuracy});
        }
    }

    result.trained_digest = policy.params_digest();
    return result;
}

void write_telemetry(const std::filesystem::path& path,
                     const std::vector<TrainStepTelemetry>& rows) {
    std::ostringstream out;
    for (const TrainStepTelemetry& row : rows) {
        nlohmann::ordered_json j;
        j["step"] = row.step;
        j["l_dpo"] = row.l_dpo;
        j["l_align"] = row.l_align;
        j["l_total"] = row.l_total;
        j["margin"] = row.margin;
        j["reward_accuracy"] = row.reward_accuracy;
        out << j.dump() << "\n";
    }
    atomic_write_file(path, out.str());
}

std::vector<TrainStepTelemetry> read_telemetry(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<TrainStepTelemetry> rows;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ParseError(line_no, "telemetry line is not a JSON object");
        }
        TrainStepTelemetry row;
        try {
            row.step = j.at("step").get<int>();
            row.l_dpo = j.at("l_dpo").get<double>();
            row.l_align = j.at("l_align").get<double>();
            row.l_total = j.at("l_total").get<double>();
            row.margin = j.at("margin").get<double>();
            row.reward_accuracy = j.at("reward_accuracy").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("telemetry: ") + e.what());
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace sena
