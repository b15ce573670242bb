#include "toy_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace sena {

namespace {

const char* kBaseWords[] = {
    "<eos>",  "a",      "the",   "dog",   "cat",    "tree",  "car",   "person",
    "red",    "blue",   "green", "is",    "on",     "in",    "near",  "image",
    "photo",  "sky",    "street", "table", "chair",  "light", "water", "two",
    "three",  "small",  "large", "bird",  "grass",  "house", "sign",  "window",
};

}  // namespace

ToyBackend::ToyBackend(Dims dims, uint64_t seed) : dims_(dims) {
    if (dims_.vocab < 2 || dims_.vocab > 64) {
        throw Error(ErrorCode::InvalidArgument, "toy vocab size must be in [2, 64]");
    }
    size_t v = dims_.vocab, d = dims_.embed, h = dims_.hidden;
    size_t total = v * d + d + d * kImageFeatures + d + h * 3 * d + h + v * h + v;
    params_.resize(total);
    grad_.assign(total, 0.0);

    Rng rng(derive_seed(seed, "toy-init"));
    std::normal_distribution<double> dist(0.0, 0.3);
    for (double& p : params_) {
        p = dist(rng);
    }

    vocab_words_.reserve(v);
    constexpr size_t n_base = sizeof(kBaseWords) / sizeof(kBaseWords[0]);
    for (size_t i = 0; i < v; ++i) {
        vocab_words_.push_back(i < n_base ? kBaseWords[i] : "tok" + std::to_string(i));
    }
}

size_t ToyBackend::off_s0() const {
    return static_cast<size_t>(dims_.vocab) * dims_.embed;
}
size_t ToyBackend::off_Wimg() const { return off_s0() + dims_.embed; }
size_t ToyBackend::off_bimg() const {
    return off_Wimg() + static_cast<size_t>(dims_.embed) * kImageFeatures;
}
size_t ToyBackend::off_Wh() const { return off_bimg() + dims_.embed; }
size_t ToyBackend::off_bh() const {
    return off_Wh() + static_cast<size_t>(dims_.hidden) * 3 * dims_.embed;
}
size_t ToyBackend::off_Wout() const { return off_bh() + dims_.hidden; }
size_t ToyBackend::off_bout() const {
    return off_Wout() + static_cast<size_t>(dims_.vocab) * dims_.hidden;
}

int ToyBackend::token_id(const std::string& word) const {
    return 1 + static_cast<int>(fnv1a64(word) % (dims_.vocab - 1));
}

std::array<double, ToyBackend::kImageFeatures> ToyBackend::image_features(
    const ImageInput& image) const {
    std::array<double, kImageFeatures> phi{};
    if (!image.pixels || image.pixels->values.empty()) {
        return phi;
    }
    const ImageArray& px = *image.pixels;
    int channels = std::min(px.channels, 3);
    double global_sum = 0.0;
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (int y = 0; y < px.height; ++y) {
            for (int x = 0; x < px.width; ++x) {
                double v = px.at(c, y, x);
                sum += v;
                sumsq += v * v;
            }
        }
        double n = static_cast<double>(px.height) * px.width;
        double mean = sum / n;
        global_sum += sum;
        phi[12 + c] = std::sqrt(std::max(0.0, sumsq / n - mean * mean));
        // 2x2 pooled cell means
        for (int r = 0; r < 2; ++r) {
            int y0 = r * px.height / 2;
            int y1 = std::max(y0 + 1, (r + 1) * px.height / 2);
            y1 = std::min(y1, px.height);
            y0 = std::min(y0, y1 - 1);
            for (int cc = 0; cc < 2; ++cc) {
                int x0 = cc * px.width / 2;
                int x1 = std::max(x0 + 1, (cc + 1) * px.width / 2);
                x1 = std::min(x1, px.width);
                x0 = std::min(x0, x1 - 1);
                double cell = 0.0;
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        cell += px.at(c, y, x);
                    }
                }
                phi[c * 4 + r * 2 + cc] =
                    cell / (static_cast<double>(y1 - y0) * (x1 - x0));
            }
        }
    }
    phi[15] = global_sum / static_cast<double>(px.values.size());
    return phi;
}

struct ToyBackend::Tape {
    std::array<double, kImageFeatures> phi{};
    std::vector<double> f;         // D
    std::vector<double> eq;        // D
    std::vector<int> q_ids;
    std::vector<int> y_ids;
    std::vector<double> u;         // n x 3D
    std::vector<double> h;         // n x H
    std::vector<double> prob;      // n x V
    std::vector<double> logprobs;  // n
};

void ToyBackend::forward(const ImageInput& image, const std::string& question,
                         const std::string& answer, Tape& tape) const {
    const int D = dims_.embed, H = dims_.hidden, V = dims_.vocab;
    const double* E = params_.data() + off_E();
    const double* s0 = params_.data() + off_s0();
    const double* Wimg = params_.data() + off_Wimg();
    const double* bimg = params_.data() + off_bimg();
    const double* Wh = params_.data() + off_Wh();
    const double* bh = params_.data() + off_bh();
    const double* Wout = params_.data() + off_Wout();
    const double* bout = params_.data() + off_bout();

    tape.phi = image_features(image);
    tape.f.assign(D, 0.0);
    for (int i = 0; i < D; ++i) {
        double g = bimg[i];
        for (int j = 0; j < kImageFeatures; ++j) {
            g += Wimg[i * kImageFeatures + j] * tape.phi[j];
        }
        tape.f[i] = std::tanh(g);
    }

    tape.eq.assign(D, 0.0);
    for (const std::string& word : tokenize_words(question)) {
        tape.q_ids.push_back(token_id(word));
    }
    if (!tape.q_ids.empty()) {
        for (int id : tape.q_ids) {
            for (int j = 0; j < D; ++j) {
                tape.eq[j] += E[id * D + j];
            }
        }
        for (int j = 0; j < D; ++j) {
            tape.eq[j] /= static_cast<double>(tape.q_ids.size());
        }
    }

    std::vector<std::string> words = tokenize_words(answer);
    if (words.empty()) {
        throw Error(ErrorCode::EmptyAnswer, "answer tokenizes to zero tokens");
    }
    for (const std::string& word : words) {
        tape.y_ids.push_back(token_id(word));
    }

    const size_t n = tape.y_ids.size();
    tape.u.assign(n * 3 * D, 0.0);
    tape.h.assign(n * H, 0.0);
    tape.prob.assign(n * V, 0.0);
    tape.logprobs.assign(n, 0.0);

    std::vector<double> z(V);
    for (size_t s = 0; s < n; ++s) {
        double* u = tape.u.data() + s * 3 * D;
        const double* prev = (s == 0) ? s0 : E + static_cast<size_t>(tape.y_ids[s - 1]) * D;
        for (int j = 0; j < D; ++j) {
            u[j] = tape.f[j];
            u[D + j] = tape.eq[j];
            u[2 * D + j] = prev[j];
        }
        double* hs = tape.h.data() + s * H;
        for (int k = 0; k < H; ++k) {
            double a = bh[k];
            const double* row = Wh + static_cast<size_t>(k) * 3 * D;
            for (int j = 0; j < 3 * D; ++j) {
                a += row[j] * u[j];
            }
            hs[k] = std::tanh(a);
        }
        double zmax = -1e300;
        for (int v = 0; v < V; ++v) {
            double zz = bout[v];
            const double* row = Wout + static_cast<size_t>(v) * H;
            for (int k = 0; k < H; ++k) {
                zz += row[k] * hs[k];
            }
            z[v] = zz;
            zmax = std::max(zmax, zz);
        }
        double denom = 0.0;
        for (int v = 0; v < V; ++v) {
            denom += std::exp(z[v] - zmax);
        }
        double* ps = tape.prob.data() + s * V;
        for (int v = 0; v < V; ++v) {
            ps[v] = std::exp(z[v] - zmax) / denom;
        }
        tape.logprobs[s] = z[tape.y_ids[s]] - zmax - std::log(denom);
    }
}

SequenceLikelihood ToyBackend::score_answer(const ImageInput& image, const std::string& question,
                                            const std::string& answer) {
    Tape tape;
    forward(image, question, answer, tape);
    return SequenceLikelihood::from_token_logprobs(std::move(tape.logprobs));
}

void ToyBackend::accumulate_answer_grad(const ImageInput& image, const std::string& question,
                                        const std::string& answer,
                                        std::span<const double> upstream) {
    require_mutable();
    Tape tape;
    forward(image, question, answer, tape);
    const size_t n = tape.y_ids.size();
    if (upstream.size() != n) {
        throw Error(ErrorCode::InvalidArgument,
                    "upstream length " + std::to_string(upstream.size()) +
                        " does not match token count " + std::to_string(n));
    }
    const int D = dims_.embed, H = dims_.hidden, V = dims_.vocab;
    const double* Wh = params_.data() + off_Wh();
    const double* Wout = params_.data() + off_Wout();
    double* gE = grad_.data() + off_E();
    double* gs0 = grad_.data() + off_s0();
    double* gWimg = grad_.data() + off_Wimg();
    double* gbimg = grad_.data() + off_bimg();
    double* gWh = grad_.data() + off_Wh();
    double* gbh = grad_.data() + off_bh();
    double* gWout = grad_.data() + off_Wout();
    double* gbout = grad_.data() + off_bout();

    std::vector<double> df(D, 0.0), deq(D, 0.0);
    std::vector<double> dz(V), dh(H), da(H), du(3 * D);
    for (size_t s = 0; s < n; ++s) {
        const double w = upstream[s];
        const double* ps = tape.prob.data() + s * V;
        const double* hs = tape.h.data() + s * H;
        const double* us = tape.u.data() + s * 3 * D;
        for (int v = 0; v < V; ++v) {
            dz[v] = w * ((v == tape.y_ids[s] ? 1.0 : 0.0) - ps[v]);
        }
        for (int v = 0; v < V; ++v) {
            double* row = gWout + static_cast<size_t>(v) * H;
            for (int k = 0; k < H; ++k) {
                row[k] += dz[v] * hs[k];
            }
            gbout[v] += dz[v];
        }
        for (int k = 0; k < H; ++k) {
            double acc = 0.0;
            for (int v = 0; v < V; ++v) {
                acc += Wout[static_cast<size_t>(v) * H + k] * dz[v];
            }
            dh[k] = acc;
            da[k] = acc * (1.0 - hs[k] * hs[k]);
        }
        for (int k = 0; k < H; ++k) {
            double* row = gWh + static_cast<size_t>(k) * 3 * D;
            for (int j = 0; j < 3 * D; ++j) {
                row[j] += da[k] * us[j];
            }
            gbh[k] += da[k];
        }
        for (int j = 0; j < 3 * D; ++j) {
            double acc = 0.0;
            for (int k = 0; k < H; ++k) {
                acc += Wh[static_cast<size_t>(k) * 3 * D + j] * da[k];
            }
            du[j] = acc;
        }
        for (int j = 0; j < D; ++j) {
            df[j] += du[j];
            deq[j] += du[D + j];
        }
        if (s == 0) {
            for (int j = 0; j < D; ++j) {
                gs0[j] += du[2 * D + j];
            }
        } else {
            double* row = gE + static_cast<size_t>(tape.y_ids[s - 1]) * D;
            for (int j = 0; j < D; ++j) {
                row[j] += du[2 * D + j];
            }
        }
    }
    for (int i = 0; i < D; ++i) {
        double dg = df[i] * (1.0 - tape.f[i] * tape.f[i]);
        double* row = gWimg + static_cast<size_t>(i) * kImageFeatures;
        for (int j = 0; j < kImageFeatures; ++j) {
            row[j] += dg * tape.phi[j];
        }
        gbimg[i] += dg;
    }
    if (!tape.q_ids.empty()) {
        double inv_m = 1.0 / static_cast<double>(tape.q_ids.size());
        for (int id : tape.q_ids) {
            double* row = gE + static_cast<size_t>(id) * D;
            for (int j = 0; j < D; ++j) {
                row[j] += deq[j] * inv_m;
            }
        }
    }
}

std::string ToyBackend::generate(const ConversationContext& context) {
    context.validate();
    const std::string& question = context.last_user_text();
    const int D = dims_.embed, H = dims_.hidden, V = dims_.vocab;
    const double* E = params_.data() + off_E();
    const double* s0 = params_.data() + off_s0();
    const double* Wh = params_.data() + off_Wh();
    const double* bh = params_.data() + off_bh();
    const double* Wout = params_.data() + off_Wout();
    const double* bout = params_.data() + off_bout();

    std::array<double, kImageFeatures> phi = image_features(context.image);
    std::vector<double> f(D, 0.0);
    {
        const double* Wimg = params_.data() + off_Wimg();
        const double* bimg = params_.data() + off_bimg();
        for (int i = 0; i < D; ++i) {
            double g = bimg[i];
            for (int j = 0; j < kImageFeatures; ++j) {
                g += Wimg[i * kImageFeatures + j] * phi[j];
            }
            f[i] = std::tanh(g);
        }
    }
    std::vector<int> q_ids;
    for (const std::string& word : tokenize_words(question)) {
        q_ids.push_back(token_id(word));
    }
    std::vector<double> eq(D, 0.0);
    if (!q_ids.empty()) {
        for (int id : q_ids) {
            for (int j = 0; j < D; ++j) {
                eq[j] += E[id * D + j];
            }
        }
        for (int j = 0; j < D; ++j) {
            eq[j] /= static_cast<double>(q_ids.size());
        }
    }

    std::vector<double> u(3 * D), h(H), z(V);
    const double* prev = s0;
    std::ostringstream text;
    int emitted = 0;
    for (int step = 0; step < dims_.max_gen_len; ++step) {
        for (int j = 0; j < D; ++j) {
            u[j] = f[j];
            u[D + j] = eq[j];
            u[2 * D + j] = prev[j];
        }
        for (int k = 0; k < H; ++k) {
            double a = bh[k];
            const double* row = Wh + static_cast<size_t>(k) * 3 * D;
            for (int j = 0; j < 3 * D; ++j) {
                a += row[j] * u[j];
            }
            h[k] = std::tanh(a);
        }
        int best = 0;
        double best_z = -1e300;
        for (int v = 0; v < V; ++v) {
            double zz = bout[v];
            const double* row = Wout + static_cast<size_t>(v) * H;
            for (int k = 0; k < H; ++k) {
                zz += row[k] * h[k];
            }
            if (zz > best_z) {
                best_z = zz;
                best = v;
            }
        }
        if (best == 0) {  // <eos>
            break;
        }
        if (emitted > 0) {
            text << " ";
        }
        text << vocab_words_[best];
        ++emitted;
        prev = E + static_cast<size_t>(best) * D;
    }
    if (emitted == 0) {
        throw Error(ErrorCode::EmptyGeneration, "toy model emitted only the stop token");
    }
    return text.str();
}

std::shared_ptr<Backend> ToyBackend::snapshot() const {
    auto copy = std::make_shared<ToyBackend>(*this);
    copy->frozen_ = true;
    copy->grad_.assign(copy->grad_.size(), 0.0);
    return copy;
}

void ToyBackend::require_mutable() const {
    if (frozen_) {
        throw Error(ErrorCode::BackendFailure, "backend snapshot is frozen");
    }
}

std::span<double> ToyBackend::params() {
    require_mutable();
    return params_;
}

void ToyBackend::zero_grad() {
    require_mutable();
    grad_.assign(grad_.size(), 0.0);
}

void ToyBackend::save_params(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << "SENATOYCKPT1\n";
    int32_t header[4] = {dims_.vocab, dims_.embed, dims_.hidden, dims_.max_gen_len};
    uint64_t count = params_.size();
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(params_.data()),
              static_cast<std::streamsize>(params_.size() * sizeof(double)));
    atomic_write_file(path, out.str());
}

void ToyBackend::load_params(const std::filesystem::path& path) {
    require_mutable();
    std::string raw = read_text_file(path);
    const std::string magic = "SENATOYCKPT1\n";
    if (raw.size() < magic.size() || raw.compare(0, magic.size(), magic) != 0) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': not a toy checkpoint");
    }
    size_t off = magic.size();
    int32_t header[4];
    uint64_t count = 0;
    if (raw.size() < off + sizeof(header) + sizeof(count)) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': truncated checkpoint header");
    }
    std::memcpy(header, raw.data() + off, sizeof(header));
    off += sizeof(header);
    std::memcpy(&count, raw.data() + off, sizeof(count));
    off += sizeof(count);
    if (header[0] != dims_.vocab || header[1] != dims_.embed || header[2] != dims_.hidden) {
        throw Error(ErrorCode::InvalidArgument,
                    "'" + path.string() + "': checkpoint dimensions do not match backend config");
    }
    if (count != params_.size() || raw.size() - off != count * sizeof(double)) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': truncated checkpoint payload");
    }
    std::memcpy(params_.data(), raw.data() + off, count * sizeof(double));
}

std::string ToyBackend::params_digest() const {
    std::string bytes(reinterpret_cast<const char*>(params_.data()),
                      params_.size() * sizeof(double));
    return sha256_hex(bytes);
}

}  // namespace sena
