#include "metrics.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "backend.hpp"
#include "errors.hpp"
#include "util.hpp"

namespace sena {

namespace {

// Does the response word realize the vocabulary word, allowing the regular
// plural spellings?
bool word_matches(const std::string& response_word, const std::string& vocab_word) {
    if (response_word == vocab_word) {
        return true;
    }
    if (response_word == vocab_word + "s" || response_word == vocab_word + "es") {
        return true;
    }
    if (vocab_word.size() >= 2 && vocab_word.back() == 'y' &&
        response_word == vocab_word.substr(0, vocab_word.size() - 1) + "ies") {
        return true;
    }
    return false;
}

}  // namespace

std::set<std::string> extract_objects(const std::string& response,
                                      const std::vector<std::string>& vocabulary) {
    if (vocabulary.empty()) {
        throw Error(ErrorCode::InvalidArgument, "object vocabulary is empty");
    }
    std::vector<std::string> words = tokenize_words(response);
    std::set<std::string> found;
    for (const std::string& entry : vocabulary) {
        std::vector<std::string> entry_words = tokenize_words(entry);
        if (entry_words.empty() || entry_words.size() > words.size()) {
            continue;
        }
        for (size_t i = 0; i + entry_words.size() <= words.size(); ++i) {
            bool match = true;
            for (size_t k = 0; k + 1 < entry_words.size(); ++k) {
                if (words[i + k] != entry_words[k]) {
                    match = false;
                    break;
                }
            }
            // Plural folding applies to the head noun only, i.e. the last
            // token of a multi-word entry.
            if (match && word_matches(words[i + entry_words.size() - 1], entry_words.back())) {
                found.insert(entry);
                break;
            }
        }
    }
    return found;
}

GenerativeMetrics generative_metrics(const std::set<std::string>& response_objects,
                                     const AmberAnnotation& annotation) {
    if (annotation.existing.empty()) {
        throw Error(ErrorCode::EmptyAnnotation,
                    "annotation for image '" + annotation.image_id + "' has no existing objects");
    }
    GenerativeMetrics m;
    if (response_objects.empty()) {
        m.no_objects = true;
        return m;
    }
    size_t in_existing = 0, in_targets = 0;
    for (const std::string& obj : response_objects) {
        if (annotation.existing.count(obj)) {
            ++in_existing;
        }
        if (annotation.hallucination_targets.count(obj)) {
            ++in_targets;
        }
    }
    double r = static_cast<double>(response_objects.size());
    m.chair = 1.0 - static_cast<double>(in_existing) / r;
    m.cover = static_cast<double>(in_existing) / static_cast<double>(annotation.existing.size());
    m.hal = m.chair > 0.0 ? 1.0 : 0.0;
    m.cog = static_cast<double>(in_targets) / r;
    return m;
}

CorpusMetrics corpus_metrics(const std::vector<GenerativeMetrics>& per_response) {
    if (per_response.empty()) {
        throw Error(ErrorCode::EmptyDataset, "corpus metrics of zero responses are undefined");
    }
    CorpusMetrics c;
    for (const GenerativeMetrics& m : per_response) {
        c.chair += m.chair;
        c.cover += m.cover;
        c.hal += m.hal;
        c.cog += m.cog;
    }
    double n = static_cast<double>(per_response.size());
    c.chair /= n;
    c.cover /= n;
    c.hal /= n;
    c.cog /= n;
    c.responses = per_response.size();
    return c;
}

std::vector<AmberAnnotation> read_annotations(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<AmberAnnotation> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ParseError(line_no, "annotation line is not a JSON object");
        }
        AmberAnnotation a;
        try {
            a.image_id = j.at("image_id").get<std::string>();
            for (const auto& v : j.at("existing")) {
                a.existing.insert(v.get<std::string>());
            }
            if (j.contains("hallucination_targets")) {
                for (const auto& v : j.at("hallucination_targets")) {
                    a.hallucination_targets.insert(v.get<std::string>());
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("annotation: ") + e.what());
        }
        if (a.existing.empty()) {
            throw ParseError(line_no, "annotation has an empty existing-object set");
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> read_responses(
    const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ParseError(line_no, "response line is not a JSON object");
        }
        try {
            out.emplace_back(j.at("image_id").get<std::string>(),
                             j.at("response").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("response: ") + e.what());
        }
    }
    return out;
}

std::vector<std::string> read_vocabulary(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string entry = strip_text(line);
        if (entry.empty() || entry[0] == '#') {
            continue;
        }
        out.push_back(entry);
    }
    return out;
}

}  // namespace sena
