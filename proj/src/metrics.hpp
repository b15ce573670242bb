#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace sena {

// Ground-truth object annotation for one image: the objects that exist and
// the typical hallucination targets humans name for it.
struct AmberAnnotation {
    std::string image_id;
    std::set<std::string> existing;               // must be non-empty
    std::set<std::string> hallucination_targets;  // may be empty
};

// Per-response hallucination scores, all in [0, 1]. hal is 0 or 1 per
// response; corpus-level values are plain means. no_objects marks responses
// that named nothing from the vocabulary, where the ratios are defined as 0.
struct GenerativeMetrics {
    double chair = 0.0;
    double cover = 0.0;
    double hal = 0.0;
    double cog = 0.0;
    bool no_objects = false;
};

struct CorpusMetrics {
    double chair = 0.0;
    double cover = 0.0;
    double hal = 0.0;
    double cog = 0.0;
    size_t responses = 0;
};

// Case-insensitive whole-word matches of vocabulary nouns in the response,
// with simple plural forms (-s, -es, -ies) folded onto the singular entry.
// Multi-word entries match as consecutive token runs.
std::set<std::string> extract_objects(const std::string& response,
                                      const std::vector<std::string>& vocabulary);

// With R the response objects, A the existing set and H the hallucination
// targets: chair = 1 - |R&A|/|R|, cover = |R&A|/|A|, hal = [chair > 0],
// cog = |R&H|/|R|.
GenerativeMetrics generative_metrics(const std::set<std::string>& response_objects,
                                     const AmberAnnotation& annotation);

// Field-wise means. Throws EmptyDataset on an empty corpus.
CorpusMetrics corpus_metrics(const std::vector<GenerativeMetrics>& per_response);

// JSONL: {"image_id": ..., "existing": [...], "hallucination_targets": [...]}
std::vector<AmberAnnotation> read_annotations(const std::filesystem::path& path);

// JSONL: {"image_id": ..., "response": ...}
std::vector<std::pair<std::string, std::string>> read_responses(
    const std::filesystem::path& path);

// Plain text, one vocabulary entry per line; blank lines and '#' comments
// are skipped.
std::vector<std::string> read_vocabulary(const std::filesystem::path& path);

}  // namespace sena
