#pragma once

#include <filesystem>
#include <vector>

#include "types.hpp"

namespace sena {

// Preference dataset file: UTF-8 JSON Lines, one record per line with keys
// exactly image_id, question, question_kind, chosen, rejected, chosen_raw,
// noise_step, iteration. Round-trips field for field.
size_t write_dataset(const std::vector<PreferenceRecord>& records,
                     const std::filesystem::path& path);
std::vector<PreferenceRecord> read_dataset(const std::filesystem::path& path);

// Triplet files carry the image uri as well so downstream stages can reload
// pixels without a separate manifest.
void write_triplets(const std::vector<QuestionTriplet>& triplets,
                    const std::filesystem::path& path);
std::vector<QuestionTriplet> read_triplets(const std::filesystem::path& path);

}  // namespace sena
