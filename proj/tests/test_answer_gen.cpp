#include <doctest.h>

#include <string>
#include <vector>

#include "answer_gen.hpp"
#include "corruption.hpp"
#include "errors.hpp"
#include "helpers.hpp"
#include "mock_backend.hpp"

using namespace sena;
using sena::test::MockScriptBuilder;
using sena::test::PipelineAnswers;

namespace {

EvolutionConfig pair_config() {
    EvolutionConfig c;
    c.seed = 31;
    c.noise_steps = 5;
    c.schedule_t_max = 10;
    return c;
}

QuestionTriplet triplet_for(const std::string& id) {
    QuestionTriplet t;
    t.image_id = id;
    t.uri = "memory://" + id;
    t.q_des = "Describe the image concisely.";
    t.q_gen_sq = "What breed is the dog?";
    t.q_gen_raw = t.q_gen_sq;
    return t;
}

}  // namespace

TEST_CASE("chosen answers come from the clean image, rejected from the noisy pixels") {
    MockScriptBuilder builder;
    builder.exact("img", false, "q", "clean answer");
    builder.exact("img", true, "q", "noisy answer");
    MockBackend backend(builder.script());
    ImageRecord img = sena::test::make_image("img");
    CHECK(generate_chosen(backend, img, "q") == "clean answer");
    ImageArray noisy = img.pixels;
    noisy.values[0] += 3.0;  // plainly out of clean range
    CHECK(generate_rejected(backend, "img", noisy, "q") == "noisy answer");
    REQUIRE(backend.calls().size() == 2);
    CHECK_FALSE(backend.calls()[0].noisy);
    CHECK(backend.calls()[1].noisy);
    CHECK(backend.calls()[0].image_fingerprint != backend.calls()[1].image_fingerprint);
    CHECK_THROWS_AS(generate_chosen(backend, img, ""), Error);
}

TEST_CASE("self-enhancement fills the three template slots") {
    EvolutionConfig config = pair_config();
    std::string prompt = sena::test::se_prompt(config.prompts, "a dog outside",
                                               "What is this?", "a dog");
    MockScriptBuilder builder;
    builder.exact("img", false, prompt, "a brown dog outside on grass");
    MockBackend backend(builder.script());
    ImageRecord img = sena::test::make_image("img");
    bool fell_back = true;
    std::string improved = self_enhance(backend, img, "What is this?", "a dog", "a dog outside",
                                        config, false, &fell_back);
    CHECK(improved == "a brown dog outside on grass");
    CHECK_FALSE(fell_back);
    CHECK(prompt.find("a dog outside") != std::string::npos);
    CHECK(prompt.find("What is this?") != std::string::npos);
}

TEST_CASE("self-referential enhancement switches template when dedup is on") {
    EvolutionConfig config = pair_config();
    config.se_dedup_description = true;
    std::string self_prompt =
        sena::test::se_self_prompt(config.prompts, "Describe it.", "a dog");
    MockScriptBuilder builder;
    builder.exact("img", false, self_prompt, "a careful dog description");
    MockBackend backend(builder.script());
    ImageRecord img = sena::test::make_image("img");
    CHECK(self_enhance(backend, img, "Describe it.", "a dog", "a dog", config, true) ==
          "a careful dog description");
    // Without dedup the standard template is used even self-referentially.
    config.se_dedup_description = false;
    std::string std_prompt = sena::test::se_prompt(config.prompts, "a dog", "Describe it.", "a dog");
    MockScriptBuilder builder2;
    builder2.exact("img", false, std_prompt, "standard template answer");
    MockBackend backend2(builder2.script());
    CHECK(self_enhance(backend2, img, "Describe it.", "a dog", "a dog", config, true) ==
          "standard template answer");
}

TEST_CASE("an empty enhancement falls back to the unenhanced answer") {
    EvolutionConfig config = pair_config();
    std::string prompt = sena::test::se_prompt(config.prompts, "desc", "q", "prior answer");
    MockScriptBuilder builder;
    builder.exact("img", false, prompt, "");
    MockBackend backend(builder.script());
    ImageRecord img = sena::test::make_image("img");
    bool fell_back = false;
    CHECK(self_enhance(backend, img, "q", "prior answer", "desc", config, false, &fell_back) ==
          "prior answer");
    CHECK(fell_back);
    // Other failures are not swallowed.
    MockScriptBuilder none;
    MockBackend failing(none.script());
    CHECK_THROWS_AS(self_enhance(failing, img, "q", "a", "d", config, false), Error);
}

TEST_CASE("pair building runs the four steps in order on one noisy draw") {
    EvolutionConfig config = pair_config();
    ImageRecord img = sena::test::make_image("img");
    QuestionTriplet t = triplet_for("img");
    PipelineAnswers answers;
    MockScriptBuilder builder;
    sena::test::add_answer_entries(builder, config.prompts, "img", t.q_des, t.q_gen_sq, answers);
    MockBackend backend(builder.script());
    NoiseSchedule schedule =
        build_noise_schedule(config.schedule_t_max, config.beta_start, config.beta_end);

    PairBuildStats stats;
    auto records = build_preference_pairs(backend, img, t, schedule, config, 2, &stats);

    REQUIRE(records.size() == 2);
    CHECK(records[0].question == t.q_des);
    CHECK(records[0].question_kind == QuestionKind::Descriptive);
    CHECK(records[0].chosen == answers.y_des_enhanced);
    CHECK(records[0].chosen_raw == answers.y_des);
    CHECK(records[0].rejected == answers.y_des_noisy);
    CHECK(records[0].noise_step == 5);
    CHECK(records[0].iteration == 2);
    CHECK(records[1].question == t.q_gen_sq);
    CHECK(records[1].question_kind == QuestionKind::Generated);
    CHECK(records[1].chosen == answers.y_gen_enhanced);
    CHECK(records[1].chosen_raw == answers.y_gen);
    CHECK(records[1].rejected == answers.y_gen_noisy);

    CHECK(stats.records == 2);
    CHECK(stats.generation_failures == 0);
    CHECK(stats.degenerate_dropped == 0);
    CHECK(stats.se_fallbacks == 0);

    // Call trace: clean descriptive, clean generated, the two noisy calls on
    // identical pixels, then the two enhancement calls on the clean image.
    const auto& calls = backend.calls();
    REQUIRE(calls.size() == 6);
    CHECK(calls[0].prompt == t.q_des);
    CHECK_FALSE(calls[0].noisy);
    CHECK(calls[1].prompt == t.q_gen_sq);
    CHECK_FALSE(calls[1].noisy);
    CHECK(calls[2].noisy);
    CHECK(calls[3].noisy);
    CHECK(calls[2].prompt == t.q_des);
    CHECK(calls[3].prompt == t.q_gen_sq);
    CHECK(calls[2].image_fingerprint == calls[3].image_fingerprint);
    CHECK(calls[2].image_fingerprint != calls[0].image_fingerprint);
    CHECK_FALSE(calls[4].noisy);
    CHECK_FALSE(calls[5].noisy);
    CHECK(calls[4].prompt.find("Image description: " + answers.y_des) != std::string::npos);
    CHECK(calls[4].prompt.find(answers.y_des) != std::string::npos);
    CHECK(calls[5].prompt.find("Image description: " + answers.y_des) != std::string::npos);
    CHECK(calls[5].prompt.find(answers.y_gen) != std::string::npos);
    CHECK(calls[0].image_fingerprint == calls[4].image_fingerprint);
}

TEST_CASE("the noisy draw is a pure function of seed, image and step") {
    EvolutionConfig config = pair_config();
    ImageRecord img = sena::test::make_image("img");
    QuestionTriplet t = triplet_for("img");
    PipelineAnswers answers;
    MockScriptBuilder builder;
    sena::test::add_answer_entries(builder, config.prompts, "img", t.q_des, t.q_gen_sq, answers);
    NoiseSchedule schedule =
        build_noise_schedule(config.schedule_t_max, config.beta_start, config.beta_end);

    MockBackend first(builder.script());
    MockBackend second(builder.script());
    build_preference_pairs(first, img, t, schedule, config, 1);
    build_preference_pairs(second, img, t, schedule, config, 1);
    CHECK(first.calls()[2].image_fingerprint == second.calls()[2].image_fingerprint);

    EvolutionConfig other_seed = config;
    other_seed.seed = 32;
    MockBackend third(builder.script());
    build_preference_pairs(third, img, t, schedule, other_seed, 1);
    CHECK(first.calls()[2].image_fingerprint != third.calls()[2].image_fingerprint);
}

TEST_CASE("disabling enhancement keeps the raw chosen answers") {
    EvolutionConfig config = pair_config();
    config.se_on_descriptive = false;
    config.se_on_generated = false;
    ImageRecord img = sena::test::make_image("img");
    QuestionTriplet t = triplet_for("img");
    PipelineAnswers answers;
    MockScriptBuilder builder;
    sena::test::add_answer_entries(builder, config.prompts, "img", t.q_des, t.q_gen_sq, answers);
    MockBackend backend(builder.script());
    NoiseSchedule schedule =
        build_noise_schedule(config.schedule_t_max, config.beta_start, config.beta_end);
    auto records = build_preference_pairs(backend, img, t, schedule, config, 1);
    REQUIRE(records.size() == 2);
    CHECK(records[0].chosen == answers.y_des);
    CHECK(records[0].chosen == records[0].chosen_raw);
    CHECK(records[1].chosen == answers.y_gen);
    CHECK(backend.calls().size() == 4);  // no enhancement calls at all
}

TEST_CASE("question-kind gates select which records are built") {
    ImageRecord img = sena::test::make_image("img");
    QuestionTriplet t = triplet_for("img");
    PipelineAnswers answers;
    NoiseSchedule schedule = build_noise_schedule(10, 1e-4, 0.02);

    EvolutionConfig only_des = pair_config();
    only_des.pairs_on_generated = false;
    MockScriptBuilder builder;
    sena::test::add_answer_entries(builder, only_des.prompts, "img", t.q_des, t.q_gen_sq, answers);
    MockBackend backend(builder.script());
    auto records = build_preference_pairs(backend, img, t, schedule, only_des, 1);
    REQUIRE(records.size() == 1);
    CHECK(records[0].question_kind == QuestionKind::Descriptive);
    for (const auto& call : backend.calls()) {
        CHECK(call.prompt.find(t.q_gen_sq) == std::string::npos);
    }

    EvolutionConfig only_gen = pair_config();
    only_gen.pairs_on_descriptive = false;
    MockBackend backend2(builder.script());
    auto records2 = build_preference_pairs(backend2, img, t, schedule, only_gen, 1);
    REQUIRE(records2.size() == 1);
    CHECK(records2[0].question_kind == QuestionKind::Generated);
    // The descriptive answer is still generated: enhancement depends on it.
    CHECK(backend2.calls()[0].prompt == t.q_des);
    CHECK(records2[0].chosen == answers.y_gen_enhanced);
}

TEST_CASE("degenerate pairs are dropped and counted") {
    EvolutionConfig config = pair_config();
    config.pairs_on_generated = false;
    ImageRecord img = sena::test::make_image("img");
    QuestionTriplet t = triplet_for("img");
    PipelineAnswers answers;
    answers.y_des_noisy = answers.y_des_enhanced;  // noisy answer equals the enhanced one
    MockScriptBuilder builder;
    sena::test::add_answer_entries(builder, config.prompts, "img", t.q_des, t.q_gen_sq, answers);
    MockBackend backend(builder.script());
    NoiseSchedule schedule = build_noise_schedule(10, 1e-4, 0.02);
    PairBuildStats stats;
    auto records = build_preference_pairs(backend, img, t, schedule, config, 1, &stats);
    CHECK(records.empty());
    CHECK(stats.degenerate_dropped == 1);
    CHECK(stats.records == 0);
}

TEST_CASE("a failed generation skips that record and keeps the rest") {
    EvolutionConfig config = pair_config();
    ImageRecord img = sena::test::make_image("img");
    QuestionTriplet t = triplet_for("img");
    PipelineAnswers answers;
    MockScriptBuilder builder;
    sena::test::add_answer_entries(builder, config.prompts, "img", t.q_des, t.q_gen_sq, answers);
    MockScript script = builder.script();
    // Remove the clean generated-question entry so that generation fails.
    std::erase_if(script.entries, [&](const MockScriptEntry& e) {
        return e.prompt == t.q_gen_sq && !e.noisy;
    });
    MockBackend backend(script);
    NoiseSchedule schedule = build_noise_schedule(10, 1e-4, 0.02);
    PairBuildStats stats;
    auto records = build_preference_pairs(backend, img, t, schedule, config, 1, &stats);
    REQUIRE(records.size() == 1);
    CHECK(records[0].question_kind == QuestionKind::Descriptive);
    CHECK(stats.generation_failures == 1);
    CHECK(stats.records == 1);
}

TEST_CASE("a missing descriptive answer degrades the generated record gracefully") {
    EvolutionConfig config = pair_config();
    ImageRecord img = sena::test::make_image("img");
    QuestionTriplet t = triplet_for("img");
    PipelineAnswers answers;
    MockScriptBuilder builder;
    sena::test::add_answer_entries(builder, config.prompts, "img", t.q_des, t.q_gen_sq, answers);
    MockScript script = builder.script();
    std::erase_if(script.entries, [&](const MockScriptEntry& e) {
        return e.prompt == t.q_des && !e.noisy;  // descriptive clean answer gone
    });
    MockBackend backend(script);
    NoiseSchedule schedule = build_noise_schedule(10, 1e-4, 0.02);
    PairBuildStats stats;
    auto records = build_preference_pairs(backend, img, t, schedule, config, 1, &stats);
    REQUIRE(records.size() == 1);
    CHECK(records[0].question_kind == QuestionKind::Generated);
    // Enhancement needs the description; without it the raw answer survives.
    CHECK(records[0].chosen == answers.y_gen);
    CHECK(stats.generation_failures == 1);
    CHECK(stats.se_fallbacks == 1);
}

TEST_CASE("an empty enhancement response keeps the record with the raw answer") {
    EvolutionConfig config = pair_config();
    config.pairs_on_generated = false;
    ImageRecord img = sena::test::make_image("img");
    QuestionTriplet t = triplet_for("img");
    PipelineAnswers answers;
    MockScriptBuilder builder;
    builder.exact("img", false, t.q_des, answers.y_des);
    builder.exact("img", true, t.q_des, answers.y_des_noisy);
    builder.exact("img", false,
                  sena::test::se_prompt(config.prompts, answers.y_des, t.q_des, answers.y_des),
                  "");
    MockBackend backend(builder.script());
    NoiseSchedule schedule = build_noise_schedule(10, 1e-4, 0.02);
    PairBuildStats stats;
    auto records = build_preference_pairs(backend, img, t, schedule, config, 1, &stats);
    REQUIRE(records.size() == 1);
    CHECK(records[0].chosen == answers.y_des);
    CHECK(stats.se_fallbacks == 1);
}

TEST_CASE("dataset building preserves triplet order for any worker count") {
    EvolutionConfig config = pair_config();
    NoiseSchedule schedule =
        build_noise_schedule(config.schedule_t_max, config.beta_start, config.beta_end);
    ImageStore store;
    MockScriptBuilder builder;
    std::vector<QuestionTriplet> triplets;
    for (int i = 0; i < 9; ++i) {
        std::string id = "d-" + std::to_string(i);
        store.add_record(sena::test::make_image(id));
        QuestionTriplet t = triplet_for(id);
        t.q_gen_sq = "Generated question " + std::to_string(i) + "?";
        triplets.push_back(t);
        PipelineAnswers answers;
        answers.y_des = "description of image " + std::to_string(i);
        answers.y_des_enhanced = answers.y_des + " with more detail";
        sena::test::add_answer_entries(builder, config.prompts, id, t.q_des, t.q_gen_sq, answers);
    }

    MockBackend serial(builder.script());
    PairBuildStats serial_stats;
    auto one = build_preference_dataset(serial, store, triplets, schedule, config, 1,
                                        &serial_stats, 1);
    MockBackend parallel(builder.script());
    PairBuildStats parallel_stats;
    auto four = build_preference_dataset(parallel, store, triplets, schedule, config, 1,
                                         &parallel_stats, 4);
    REQUIRE(one.size() == 18);
    CHECK(one == four);
    CHECK(serial_stats.records == 18);
    CHECK(parallel_stats.records == 18);
    for (int i = 0; i < 9; ++i) {
        CHECK(one[2 * i].image_id == "d-" + std::to_string(i));
        CHECK(one[2 * i].question_kind == QuestionKind::Descriptive);
        CHECK(one[2 * i + 1].question_kind == QuestionKind::Generated);
    }
}
