#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "backend.hpp"
#include "errors.hpp"
#include "helpers.hpp"
#include "hybrid_backend.hpp"
#include "mock_backend.hpp"
#include "toy_backend.hpp"

using namespace sena;
using sena::test::MockScriptBuilder;
using sena::test::TempDir;

namespace {

ConversationContext ask(const ImageRecord& image, const std::string& prompt) {
    return ConversationContext{clean_input(image), {{Role::User, prompt}}};
}

bool code_is(const Error& e, ErrorCode code) { return e.code() == code; }

}  // namespace

TEST_CASE("conversation context enforces alternation starting with a user turn") {
    ImageRecord img = sena::test::make_image("ctx");
    ConversationContext ok{clean_input(img),
                           {{Role::User, "q"}, {Role::Assistant, "a"}, {Role::User, "q2"}}};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.last_user_text() == "q2");

    ConversationContext empty{clean_input(img), {}};
    CHECK_THROWS_AS(empty.validate(), Error);
    ConversationContext starts_assistant{clean_input(img), {{Role::Assistant, "a"}}};
    CHECK_THROWS_AS(starts_assistant.validate(), Error);
    ConversationContext doubled{clean_input(img), {{Role::User, "q"}, {Role::User, "q"}}};
    CHECK_THROWS_AS(doubled.validate(), Error);
}

TEST_CASE("sequence likelihood aggregates in log space") {
    auto lik = SequenceLikelihood::from_token_logprobs({-1.0, -2.0, -3.5});
    CHECK(lik.length == 3);
    CHECK(lik.sum_logprob == doctest::Approx(-6.5));
    CHECK(lik.mean_logprob == doctest::Approx(-6.5 / 3));
}

TEST_CASE("mock backend matching: exact entries beat substring entries") {
    MockScriptBuilder builder;
    builder.contains("img", false, "question", "substring answer");
    builder.exact("img", false, "the question", "exact answer");
    MockBackend mock(builder.script());
    ImageRecord img = sena::test::make_image("img");
    CHECK(mock.generate(ask(img, "the question")) == "exact answer");
    CHECK(mock.generate(ask(img, "another question entirely")) == "substring answer");
    CHECK_THROWS_AS(mock.generate(ask(img, "no entry for this")), Error);
}

TEST_CASE("mock backend separates clean and noisy entries") {
    MockScriptBuilder builder;
    builder.exact("img", false, "describe", "clean answer");
    builder.exact("img", true, "describe", "noisy answer");
    MockBackend mock(builder.script());
    ImageRecord img = sena::test::make_image("img");
    CHECK(mock.generate(ask(img, "describe")) == "clean answer");
    ConversationContext noisy{noisy_input("img", img.pixels), {{Role::User, "describe"}}};
    CHECK(mock.generate(noisy) == "noisy answer");
}

TEST_CASE("mock backend records calls with image fingerprints") {
    MockScriptBuilder builder;
    builder.exact("img", false, "q", "a");
    MockBackend mock(builder.script());
    ImageRecord img = sena::test::make_image("img");
    mock.generate(ask(img, "q"));
    mock.score_answer(clean_input(img), "q", "some answer");
    REQUIRE(mock.calls().size() == 2);
    CHECK(mock.calls()[0].kind == MockBackend::CallKind::Generate);
    CHECK(mock.calls()[0].prompt == "q");
    CHECK(mock.calls()[0].response == "a");
    CHECK(mock.calls()[1].kind == MockBackend::CallKind::Score);
    CHECK(mock.calls()[0].image_fingerprint == mock.calls()[1].image_fingerprint);
    CHECK(mock.calls()[0].image_fingerprint != 0);

    // A different pixel payload under the same id fingerprints differently.
    ImageRecord other = sena::test::make_image("img", 1, 4, 4, 999);
    MockBackend fresh(builder.script());
    fresh.score_answer(clean_input(img), "q", "x");
    fresh.score_answer(clean_input(other), "q", "x");
    CHECK(fresh.calls()[0].image_fingerprint != fresh.calls()[1].image_fingerprint);
}

TEST_CASE("mock scoring is deterministic across instances and snapshots") {
    MockScriptBuilder builder;
    builder.exact("img", false, "q", "a");
    MockBackend one(builder.script());
    MockBackend two(builder.script());
    ImageRecord img = sena::test::make_image("img");
    auto l1 = one.score_answer(clean_input(img), "q", "the dog sat down");
    auto l2 = two.score_answer(clean_input(img), "q", "the dog sat down");
    CHECK(l1.token_logprobs == l2.token_logprobs);
    CHECK(l1.length == 4);
    for (double lp : l1.token_logprobs) {
        CHECK(lp < 0.0);
    }
    auto snap = one.snapshot();
    auto l3 = snap->score_answer(clean_input(img), "q", "the dog sat down");
    CHECK(l3.token_logprobs == l1.token_logprobs);
    // Different question, answer position or noisy flag changes the scores.
    auto l4 = one.score_answer(clean_input(img), "other q", "the dog sat down");
    CHECK(l4.sum_logprob != l1.sum_logprob);
    auto l5 = one.score_answer(noisy_input("img", img.pixels), "q", "the dog sat down");
    CHECK(l5.sum_logprob != l1.sum_logprob);
}

TEST_CASE("mock script files round-trip") {
    TempDir dir;
    MockScriptBuilder builder;
    builder.exact("img", false, "q", "a");
    builder.contains("img", true, "frag", "b");
    auto path = dir / "script.json";
    builder.script().save(path);
    MockScript back = MockScript::load(path);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].prompt == "q");
    CHECK(back.entries[0].noisy == false);
    CHECK(back.entries[1].prompt_contains == "frag");
    CHECK(back.entries[1].noisy == true);
    CHECK(back.entries[1].response == "b");
}

TEST_CASE("mock empty scripted response surfaces as empty generation") {
    MockScriptBuilder builder;
    builder.exact("img", false, "q", "");
    MockBackend mock(builder.script());
    ImageRecord img = sena::test::make_image("img");
    try {
        mock.generate(ask(img, "q"));
        FAIL("expected EmptyGeneration");
    } catch (const Error& e) {
        CHECK(code_is(e, ErrorCode::EmptyGeneration));
    }
    CHECK_THROWS_AS(mock.score_answer(clean_input(img), "q", "!!!"), Error);
}

TEST_CASE("toy scoring with zeroed parameters is the uniform distribution") {
    ToyBackend toy({}, 7);
    std::fill(toy.params().begin(), toy.params().end(), 0.0);
    ImageRecord img = sena::test::make_image("img");
    auto lik = toy.score_answer(clean_input(img), "what is here", "a dog on grass");
    const double uniform = -std::log(32.0);
    REQUIRE(lik.length == 4);
    for (double lp : lik.token_logprobs) {
        CHECK(lp == doctest::Approx(uniform).epsilon(1e-12));
    }
    CHECK(lik.sum_logprob == doctest::Approx(4 * uniform).epsilon(1e-12));
    CHECK(lik.mean_logprob == doctest::Approx(uniform).epsilon(1e-12));
}

TEST_CASE("toy generation with zeroed parameters stops immediately") {
    ToyBackend toy({}, 7);
    std::fill(toy.params().begin(), toy.params().end(), 0.0);
    ImageRecord img = sena::test::make_image("img");
    // Argmax over an all-equal distribution resolves to the stop token.
    try {
        toy.generate(ask(img, "anything"));
        FAIL("expected EmptyGeneration");
    } catch (const Error& e) {
        CHECK(code_is(e, ErrorCode::EmptyGeneration));
    }
}

TEST_CASE("toy generation is deterministic, bounded and over real words") {
    ToyBackend toy({}, 7);
    ImageRecord img = sena::test::make_image("img");
    std::string a = toy.generate(ask(img, "what do you see"));
    std::string b = toy.generate(ask(img, "what do you see"));
    CHECK(a == b);
    CHECK(!a.empty());
    CHECK(tokenize_words(a).size() <= 16);
    // The same words on a different image may differ, but must stay stable.
    ImageRecord img2 = sena::test::make_image("img2");
    CHECK(toy.generate(ask(img2, "what do you see")) ==
          toy.generate(ask(img2, "what do you see")));
}

TEST_CASE("toy token ids avoid the reserved stop id and stay stable") {
    ToyBackend toy({}, 7);
    CHECK(toy.token_id("dog") == toy.token_id("dog"));
    for (const char* w : {"dog", "cat", "grass", "zebra", "Dog"}) {
        int id = toy.token_id(w);
        CHECK(id >= 1);
        CHECK(id < 32);
    }
}

TEST_CASE("toy image features match hand-computed pooling") {
    ToyBackend toy({}, 7);
    ImageRecord img;
    img.image_id = "tiny";
    img.pixels.channels = 1;
    img.pixels.height = 2;
    img.pixels.width = 2;
    img.pixels.values = {0.1, 0.5, -0.3, 0.7};
    auto phi = toy.image_features(clean_input(img));
    // 2x2 pooling over a 2x2 image: each cell is a single pixel.
    CHECK(phi[0] == doctest::Approx(0.1));
    CHECK(phi[1] == doctest::Approx(0.5));
    CHECK(phi[2] == doctest::Approx(-0.3));
    CHECK(phi[3] == doctest::Approx(0.7));
    for (int i = 4; i < 12; ++i) {
        CHECK(phi[i] == 0.0);
    }
    double mean = (0.1 + 0.5 - 0.3 + 0.7) / 4.0;
    double var = (0.01 + 0.25 + 0.09 + 0.49) / 4.0 - mean * mean;
    CHECK(phi[12] == doctest::Approx(std::sqrt(var)));
    CHECK(phi[13] == 0.0);
    CHECK(phi[14] == 0.0);
    CHECK(phi[15] == doctest::Approx(mean));

    ImageInput absent{"none", nullptr, false};
    auto zero_phi = toy.image_features(absent);
    for (double v : zero_phi) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("toy answer gradient matches finite differences over every parameter") {
    ToyBackend toy({}, 11);
    ImageRecord img = sena::test::make_image("grad-img", 3, 4, 5);
    const std::string question = "what color is the dog";
    const std::string answer = "the dog is brown and small";
    auto tokens = tokenize_words(answer);
    REQUIRE(tokens.size() == 6);

    // Weighted sum of token logprobs, with distinct weights per position.
    std::vector<double> upstream(tokens.size());
    for (size_t i = 0; i < upstream.size(); ++i) {
        upstream[i] = 0.3 + 0.2 * static_cast<double>(i);
    }
    auto objective = [&](ToyBackend& b) {
        auto lik = b.score_answer(clean_input(img), question, answer);
        double v = 0.0;
        for (size_t i = 0; i < lik.token_logprobs.size(); ++i) {
            v += upstream[i] * lik.token_logprobs[i];
        }
        return v;
    };

    toy.zero_grad();
    toy.accumulate_answer_grad(clean_input(img), question, answer, upstream);
    std::vector<double> analytic(toy.grad().begin(), toy.grad().end());

    const double h = 1e-6;
    size_t checked = 0;
    for (size_t p = 0; p < toy.num_params(); ++p) {
        double saved = toy.params()[p];
        toy.params()[p] = saved + h;
        double up = objective(toy);
        toy.params()[p] = saved - h;
        double down = objective(toy);
        toy.params()[p] = saved;
        double fd = (up - down) / (2 * h);
        CHECK(analytic[p] == doctest::Approx(fd).epsilon(5e-5).scale(1.0));
        ++checked;
    }
    CHECK(checked == toy.num_params());
    CHECK(toy.num_params() == 32u * 8 + 8 + 8 * 16 + 8 + 16u * 24 + 16 + 32u * 16 + 32);
}

TEST_CASE("toy gradient accumulates across calls and zero_grad resets") {
    ToyBackend toy({}, 5);
    ImageRecord img = sena::test::make_image("img");
    std::vector<double> ones(tokenize_words("a dog").size(), 1.0);
    toy.zero_grad();
    toy.accumulate_answer_grad(clean_input(img), "q", "a dog", ones);
    std::vector<double> once(toy.grad().begin(), toy.grad().end());
    toy.accumulate_answer_grad(clean_input(img), "q", "a dog", ones);
    for (size_t p = 0; p < toy.num_params(); ++p) {
        CHECK(toy.grad()[p] == doctest::Approx(2 * once[p]).epsilon(1e-12));
    }
    toy.zero_grad();
    for (double g : toy.grad()) {
        CHECK(g == 0.0);
    }
    std::vector<double> wrong(3, 1.0);
    CHECK_THROWS_AS(toy.accumulate_answer_grad(clean_input(img), "q", "a dog", wrong), Error);
}

TEST_CASE("toy snapshot freezes parameters and survives later training") {
    ToyBackend toy({}, 7);
    ImageRecord img = sena::test::make_image("img");
    auto before = toy.score_answer(clean_input(img), "q", "a dog on grass");
    auto snap = toy.snapshot();
    CHECK_FALSE(snap->trainable());
    CHECK(toy.trainable());

    auto* frozen = dynamic_cast<TrainableBackend*>(snap.get());
    REQUIRE(frozen != nullptr);
    CHECK_THROWS_AS(frozen->params(), Error);
    CHECK_THROWS_AS(frozen->zero_grad(), Error);
    CHECK_THROWS_AS(frozen->load_params("/nonexistent"), Error);

    // Mutate the live model; the snapshot must keep scoring the old state.
    for (double& p : toy.params()) {
        p += 0.05;
    }
    auto after_live = toy.score_answer(clean_input(img), "q", "a dog on grass");
    auto after_snap = snap->score_answer(clean_input(img), "q", "a dog on grass");
    CHECK(after_snap.token_logprobs == before.token_logprobs);
    CHECK(after_live.sum_logprob != before.sum_logprob);
}

TEST_CASE("toy checkpoint files round-trip parameters and digest") {
    TempDir dir;
    ToyBackend a({}, 7);
    ToyBackend b({}, 8);
    CHECK(a.params_digest() != b.params_digest());
    auto path = dir / "ckpt.bin";
    a.save_params(path);
    b.load_params(path);
    CHECK(a.params_digest() == b.params_digest());
    std::vector<double> pa(a.params().begin(), a.params().end());
    std::vector<double> pb(b.params().begin(), b.params().end());
    CHECK(pa == pb);

    ToyBackend wrong_shape({16, 4, 8, 8}, 7);
    CHECK_THROWS_AS(wrong_shape.load_params(path), Error);
    CHECK_THROWS_AS(a.load_params(dir / "missing.bin"), Error);
}

TEST_CASE("toy rejects answers with no scoreable tokens") {
    ToyBackend toy({}, 7);
    ImageRecord img = sena::test::make_image("img");
    try {
        toy.score_answer(clean_input(img), "q", "?!...");
        FAIL("expected EmptyAnswer");
    } catch (const Error& e) {
        CHECK(code_is(e, ErrorCode::EmptyAnswer));
    }
}

TEST_CASE("toy init depends on the backend seed, not the run seed") {
    ToyBackend a({}, 7);
    ToyBackend b({}, 7);
    ToyBackend c({}, 9);
    CHECK(a.params_digest() == b.params_digest());
    CHECK(a.params_digest() != c.params_digest());
}

TEST_CASE("hybrid backend routes generation to the mock and training to the toy") {
    MockScriptBuilder builder;
    builder.exact("img", false, "q", "scripted answer");
    auto mock = std::make_shared<MockBackend>(builder.script());
    auto toy = std::make_shared<ToyBackend>(ToyBackend::Dims{}, 7);
    HybridBackend hybrid(mock, toy);
    ImageRecord img = sena::test::make_image("img");

    CHECK(hybrid.generate(ask(img, "q")) == "scripted answer");
    CHECK(mock->calls().size() == 1);

    auto direct = toy->score_answer(clean_input(img), "q", "a dog");
    auto routed = hybrid.score_answer(clean_input(img), "q", "a dog");
    CHECK(routed.token_logprobs == direct.token_logprobs);
    CHECK(hybrid.trainable());
    CHECK(hybrid.num_params() == toy->num_params());
    CHECK(hybrid.params_digest() == toy->params_digest());

    auto snap = hybrid.snapshot();
    CHECK_FALSE(snap->trainable());
    CHECK(snap->generate(ask(img, "q")) == "scripted answer");
}

TEST_CASE("make_backend builds every configured kind") {
    TempDir dir;
    EvolutionConfig config;
    config.backend.kind = "toy";
    CHECK(make_backend(config)->trainable());

    MockScriptBuilder builder;
    builder.exact("img", false, "q", "a");
    auto script_path = dir / "script.json";
    builder.script().save(script_path);
    config.backend.kind = "mock";
    config.backend.script = script_path.string();
    CHECK_FALSE(make_backend(config)->trainable());

    config.backend.kind = "hybrid";
    auto hybrid = make_backend(config);
    CHECK(hybrid->trainable());
    CHECK(dynamic_cast<HybridBackend*>(hybrid.get()) != nullptr);

    config.backend.kind = "external";
    config.backend.adapter = "test-adapter";
    register_external_backend("test-adapter", [](const EvolutionConfig& c) {
        return std::make_shared<ToyBackend>(ToyBackend::Dims{}, c.backend.seed);
    });
    CHECK(make_backend(config)->trainable());
    config.backend.adapter = "unregistered";
    CHECK_THROWS_AS(make_backend(config), Error);
}

TEST_CASE("word tokenizer lowercases and splits on non-alphanumerics") {
    auto t = tokenize_words("The dog, the DOG; dog-house 42!");
    REQUIRE(t.size() == 7);
    CHECK(t[0] == "the");
    CHECK(t[1] == "dog");
    CHECK(t[4] == "dog");
    CHECK(t[5] == "house");
    CHECK(t[6] == "42");
    CHECK(tokenize_words("  ...  ").empty());
}
