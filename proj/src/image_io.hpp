#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "types.hpp"

namespace sena {

// Raw array container format used for noisy-image output and synthetic
// inputs. ASCII header (magic, dtype, shape) followed by row-major
// little-endian float64 values:
//
//   SENAR1
//   dtype float64
//   shape <channels> <height> <width>
//   <binary payload>
void write_array(const std::filesystem::path& path, const ImageArray& array);
ImageArray read_array(const std::filesystem::path& path);

// Loads .senar, .pgm (P5) or .ppm (P6) files into a normalized [-1, 1]
// ImageRecord. 8-bit gray/color values map linearly onto the full range.
ImageRecord load_image(const std::string& image_id, const std::filesystem::path& path);

bool is_supported_image_file(const std::filesystem::path& path);

// All supported images in a directory, image_id = filename stem, sorted by id.
std::vector<std::pair<std::string, std::string>> list_image_directory(
    const std::filesystem::path& dir);

// JSONL manifest, one {"image_id": ..., "uri": ...} object per line.
std::vector<std::pair<std::string, std::string>> read_image_manifest(
    const std::filesystem::path& path);

// Resolves image ids to loaded records, loading from disk on first use.
class ImageStore {
public:
    ImageStore() = default;

    static ImageStore from_directory(const std::filesystem::path& dir);
    static ImageStore from_manifest(const std::filesystem::path& path);
    // Directory or manifest file, decided by what the path points at.
    static ImageStore from_path(const std::filesystem::path& path);

    void add_record(ImageRecord record);
    void add_reference(const std::string& image_id, const std::string& uri);

    bool contains(const std::string& image_id) const;
    const ImageRecord& get(const std::string& image_id);

    std::vector<std::string> ids() const;
    size_t size() const { return uris_.size(); }

private:
    std::map<std::string, std::string> uris_;
    std::map<std::string, ImageRecord> loaded_;
};

}  // namespace sena
