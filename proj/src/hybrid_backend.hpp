#pragma once

#include <memory>

#include "mock_backend.hpp"
#include "toy_backend.hpp"

namespace sena {

// Couples a scripted mock (generation) with a toy model (scoring and
// training). Pipeline runs that need verbatim question/answer text AND a
// trainable likelihood use this: the script controls every generated string
// while the toy parameters carry the DPO update.
class HybridBackend : public TrainableBackend {
public:
    HybridBackend(std::shared_ptr<MockBackend> mock, std::shared_ptr<ToyBackend> toy)
        : mock_(std::move(mock)), toy_(std::move(toy)) {}

    std::string generate(const ConversationContext& context) override {
        return mock_->generate(context);
    }

    SequenceLikelihood score_answer(const ImageInput& image, const std::string& question,
                                    const std::string& answer) override {
        return toy_->score_answer(image, question, answer);
    }

    std::shared_ptr<Backend> snapshot() const override;

    bool trainable() const override { return toy_->trainable(); }

    size_t num_params() const override { return toy_->num_params(); }
    std::span<double> params() override { return toy_->params(); }
    std::span<const double> params() const override {
        return static_cast<const ToyBackend&>(*toy_).params();
    }

    void zero_grad() override { toy_->zero_grad(); }
    std::span<const double> grad() const override { return toy_->grad(); }
    void accumulate_answer_grad(const ImageInput& image, const std::string& question,
                                const std::string& answer,
                                std::span<const double> upstream) override {
        toy_->accumulate_answer_grad(image, question, answer, upstream);
    }

    void save_params(const std::filesystem::path& path) const override {
        toy_->save_params(path);
    }
    void load_params(const std::filesystem::path& path) override { toy_->load_params(path); }
    std::string params_digest() const override { return toy_->params_digest(); }

    MockBackend& mock() { return *mock_; }
    ToyBackend& toy() { return *toy_; }

private:
    std::shared_ptr<MockBackend> mock_;
    std::shared_ptr<ToyBackend> toy_;
};

}  // namespace sena
