#include "backend.hpp"

#include <cctype>
#include <map>

#include "errors.hpp"
#include "hybrid_backend.hpp"
#include "mock_backend.hpp"
#include "toy_backend.hpp"

namespace sena {

void ConversationContext::validate() const {
    if (turns.empty()) {
        throw Error(ErrorCode::InvalidArgument, "context has no turns");
    }
    for (size_t i = 0; i < turns.size(); ++i) {
        Role expected = (i % 2 == 0) ? Role::User : Role::Assistant;
        if (turns[i].role != expected) {
            throw Error(ErrorCode::InvalidArgument,
                        "turns must alternate starting with user (turn " + std::to_string(i) +
                            ")");
        }
    }
}

const std::string& ConversationContext::last_user_text() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (it->role == Role::User) {
            return it->text;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "context has no user turn");
}

SequenceLikelihood SequenceLikelihood::from_token_logprobs(std::vector<double> logprobs) {
    if (logprobs.empty()) {
        throw Error(ErrorCode::EmptyAnswer, "no scored tokens");
    }
    SequenceLikelihood out;
    out.token_logprobs = std::move(logprobs);
    out.length = out.token_logprobs.size();
    double sum = 0.0;
    for (double lp : out.token_logprobs) {
        sum += lp;
    }
    out.sum_logprob = sum;
    out.mean_logprob = sum / static_cast<double>(out.length);
    return out;
}

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(current);
    }
    return tokens;
}

namespace {
std::map<std::string, ExternalBackendFactory>& external_registry() {
    static std::map<std::string, ExternalBackendFactory> registry;
    return registry;
}
}  // namespace

void register_external_backend(const std::string& identifier, ExternalBackendFactory factory) {
    external_registry()[identifier] = std::move(factory);
}

std::shared_ptr<Backend> make_backend(const EvolutionConfig& config) {
    const BackendConfig& b = config.backend;
    if (b.kind == "mock") {
        return std::make_shared<MockBackend>(MockScript::load(b.script));
    }
    if (b.kind == "toy") {
        return std::make_shared<ToyBackend>(ToyBackend::Dims{b.vocab_size, b.embed_dim,
                                                             b.hidden_dim, b.max_gen_len},
                                            b.seed);
    }
    if (b.kind == "hybrid") {
        auto mock = std::make_shared<MockBackend>(MockScript::load(b.script));
        auto toy = std::make_shared<ToyBackend>(
            ToyBackend::Dims{b.vocab_size, b.embed_dim, b.hidden_dim, b.max_gen_len}, b.seed);
        return std::make_shared<HybridBackend>(mock, toy);
    }
    if (b.kind == "external") {
        auto it = external_registry().find(b.adapter);
        if (it == external_registry().end()) {
            throw Error(ErrorCode::BackendFailure,
                        "no external backend registered under '" + b.adapter + "'");
        }
        return it->second(config);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown backend kind '" + b.kind + "'");
}

}  // namespace sena
