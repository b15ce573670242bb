#include "dataset.hpp"

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "util.hpp"

namespace sena {

using ordered_json = nlohmann::ordered_json;

static const std::set<std::string> kRecordKeys = {
    "image_id", "question", "question_kind", "chosen",
    "rejected", "chosen_raw", "noise_step", "iteration",
};

size_t write_dataset(const std::vector<PreferenceRecord>& records,
                     const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& record : records) {
        validate_record(record);
        ordered_json j;
        j["image_id"] = record.image_id;
        j["question"] = record.question;
        j["question_kind"] = question_kind_name(record.question_kind);
        j["chosen"] = record.chosen;
        j["rejected"] = record.rejected;
        j["chosen_raw"] = record.chosen_raw;
        j["noise_step"] = record.noise_step;
        j["iteration"] = record.iteration;
        out << j.dump() << "\n";
    }
    atomic_write_file(path, out.str());
    return records.size();
}

std::vector<PreferenceRecord> read_dataset(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::vector<PreferenceRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ParseError(line_no, "not a JSON object");
        }
        for (const auto& key : kRecordKeys) {
            if (!j.contains(key)) {
                throw ParseError(line_no, "missing key '" + key + "'");
            }
        }
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!kRecordKeys.count(it.key())) {
                throw ParseError(line_no, "unexpected key '" + it.key() + "'");
            }
        }
        PreferenceRecord record;
        try {
            record.image_id = j.at("image_id").get<std::string>();
            record.question = j.at("question").get<std::string>();
            record.question_kind =
                question_kind_from_name(j.at("question_kind").get<std::string>());
            record.chosen = j.at("chosen").get<std::string>();
            record.rejected = j.at("rejected").get<std::string>();
            record.chosen_raw = j.at("chosen_raw").get<std::string>();
            record.noise_step = j.at("noise_step").get<int>();
            record.iteration = j.at("iteration").get<int>();
        } catch (const ordered_json::exception& e) {
            throw ParseError(line_no, e.what());
        } catch (const Error& e) {
            throw ParseError(line_no, e.what());
        }
        try {
            validate_record(record);
        } catch (const Error& e) {
            throw ParseError(line_no, e.what());
        }
        records.push_back(std::move(record));
    }
    return records;
}

void write_triplets(const std::vector<QuestionTriplet>& triplets,
                    const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& t : triplets) {
        ordered_json j;
        j["image_id"] = t.image_id;
        j["uri"] = t.uri;
        j["q_des"] = t.q_des;
        j["q_gen_sq"] = t.q_gen_sq;
        j["q_gen_raw"] = t.q_gen_raw;
        j["sq_regenerated"] = t.sq_regenerated;
        out << j.dump() << "\n";
    }
    atomic_write_file(path, out.str());
}

std::vector<QuestionTriplet> read_triplets(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::vector<QuestionTriplet> triplets;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ParseError(line_no, "not a JSON object");
        }
        QuestionTriplet t;
        try {
            t.image_id = j.at("image_id").get<std::string>();
            t.uri = j.at("uri").get<std::string>();
            t.q_des = j.at("q_des").get<std::string>();
            t.q_gen_sq = j.at("q_gen_sq").get<std::string>();
            t.q_gen_raw = j.at("q_gen_raw").get<std::string>();
            t.sq_regenerated = j.at("sq_regenerated").get<bool>();
        } catch (const ordered_json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        if (t.q_gen_sq.empty()) {
            throw ParseError(line_no, "q_gen_sq: empty");
        }
        if (!t.sq_regenerated && t.q_gen_sq != t.q_gen_raw) {
            throw ParseError(line_no, "sq_regenerated false but q_gen_sq differs from q_gen_raw");
        }
        triplets.push_back(std::move(t));
    }
    return triplets;
}

}  // namespace sena
