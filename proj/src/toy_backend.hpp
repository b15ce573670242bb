#pragma once

#include <array>
#include <string>
#include <vector>

#include "backend.hpp"

namespace sena {

// Small differentiable autoregressive scorer used for exact gradient checks
// and CPU-scale training runs. Each answer token is predicted from a tanh
// hidden layer over [image embedding; question embedding; previous-token
// embedding], with greedy decoding over an explicit word list.
//
// Parameters live in one flat double vector:
//   E      V x D   token embeddings
//   s0     D       start-of-answer embedding
//   Wimg   D x F   image feature projection (F = 16 pooled pixel features)
//   bimg   D
//   Wh     H x 3D  hidden layer
//   bh     H
//   Wout   V x H   output logits
//   bout   V
class ToyBackend : public TrainableBackend {
public:
    struct Dims {
        int vocab = 32;    // V, includes the reserved <eos> id 0
        int embed = 8;     // D
        int hidden = 16;   // H
        int max_gen_len = 16;
    };

    static constexpr int kImageFeatures = 16;

    ToyBackend(Dims dims, uint64_t seed);

    std::string generate(const ConversationContext& context) override;
    SequenceLikelihood score_answer(const ImageInput& image, const std::string& question,
                                    const std::string& answer) override;
    std::shared_ptr<Backend> snapshot() const override;
    bool trainable() const override { return !frozen_; }

    size_t num_params() const override { return params_.size(); }
    std::span<double> params() override;
    std::span<const double> params() const override { return params_; }

    void zero_grad() override;
    std::span<const double> grad() const override { return grad_; }
    void accumulate_answer_grad(const ImageInput& image, const std::string& question,
                                const std::string& answer,
                                std::span<const double> upstream) override;

    void save_params(const std::filesystem::path& path) const override;
    void load_params(const std::filesystem::path& path) override;
    std::string params_digest() const override;

    const Dims& dims() const { return dims_; }
    // Hash-derived token id in [1, V); 0 is reserved for <eos>.
    int token_id(const std::string& word) const;

    // Pooled pixel statistics fed to the image projection: per-channel 2x2
    // means, per-channel std and the global mean. Zeros when pixels are absent.
    std::array<double, kImageFeatures> image_features(const ImageInput& image) const;

private:
    struct Tape;

    void forward(const ImageInput& image, const std::string& question, const std::string& answer,
                 Tape& tape) const;
    void require_mutable() const;

    // Parameter block offsets into params_.
    size_t off_E() const { return 0; }
    size_t off_s0() const;
    size_t off_Wimg() const;
    size_t off_bimg() const;
    size_t off_Wh() const;
    size_t off_bh() const;
    size_t off_Wout() const;
    size_t off_bout() const;

    Dims dims_;
    bool frozen_ = false;
    std::vector<double> params_;
    std::vector<double> grad_;
    std::vector<std::string> vocab_words_;
};

}  // namespace sena
