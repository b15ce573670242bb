#pragma once

#include <filesystem>
#include <string>

namespace sena {

std::string read_text_file(const std::filesystem::path& path);

// Leading/trailing whitespace removed.
std::string strip_text(const std::string& text);

// Every occurrence of `from` replaced with `to`.
std::string replace_all(std::string text, const std::string& from, const std::string& to);

// Writes via a sibling temp file and renames into place so readers never see
// a partially written artifact.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

void log_info(const std::string& message);
void log_warn(const std::string& message);

// SHA-256 hex digest of a byte string / file.
std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace sena
