#include "image_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <sstream>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "util.hpp"

namespace sena {

static_assert(std::endian::native == std::endian::little,
              "senar payloads are little-endian; big-endian hosts are unsupported");

void write_array(const std::filesystem::path& path, const ImageArray& array) {
    if (array.values.size() !=
        static_cast<size_t>(array.channels) * array.height * array.width) {
        throw Error(ErrorCode::InvalidArgument, "array shape does not match value count");
    }
    std::ostringstream out;
    out << "SENAR1\n"
        << "dtype float64\n"
        << "shape " << array.channels << " " << array.height << " " << array.width << "\n";
    out.write(reinterpret_cast<const char*>(array.values.data()),
              static_cast<std::streamsize>(array.values.size() * sizeof(double)));
    atomic_write_file(path, out.str());
}

ImageArray read_array(const std::filesystem::path& path) {
    std::string raw = read_text_file(path);
    std::istringstream in(raw);
    std::string magic, dtype_key, dtype, shape_key;
    ImageArray array;
    std::getline(in, magic);
    if (magic != "SENAR1") {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': bad magic, expected SENAR1");
    }
    in >> dtype_key >> dtype;
    if (dtype_key != "dtype" || dtype != "float64") {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': unsupported dtype");
    }
    in >> shape_key >> array.channels >> array.height >> array.width;
    if (shape_key != "shape" || !in || array.channels <= 0 || array.height <= 0 ||
        array.width <= 0) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': bad shape line");
    }
    in.get();  // newline terminating the header
    size_t count = static_cast<size_t>(array.channels) * array.height * array.width;
    size_t payload_offset = static_cast<size_t>(in.tellg());
    if (raw.size() - payload_offset != count * sizeof(double)) {
        throw Error(ErrorCode::Parse,
                    "'" + path.string() + "': payload size does not match declared shape");
    }
    array.values.resize(count);
    std::memcpy(array.values.data(), raw.data() + payload_offset, count * sizeof(double));
    return array;
}

namespace {

int read_pnm_token(std::istringstream& in, const std::string& path) {
    // Skips whitespace and '#' comment lines between header fields.
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string dummy;
            std::getline(in, dummy);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    in >> value;
    if (!in || value < 0) {
        throw Error(ErrorCode::Parse, "'" + path + "': malformed PNM header");
    }
    return value;
}

ImageArray read_pnm(const std::filesystem::path& path) {
    std::string raw = read_text_file(path);
    std::istringstream in(raw);
    std::string magic;
    in >> magic;
    int channels;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': only binary P5/P6 supported");
    }
    int width = read_pnm_token(in, path.string());
    int height = read_pnm_token(in, path.string());
    int maxval = read_pnm_token(in, path.string());
    if (maxval <= 0 || maxval > 255) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': maxval must be in [1, 255]");
    }
    in.get();  // single whitespace before payload
    size_t offset = static_cast<size_t>(in.tellg());
    size_t count = static_cast<size_t>(channels) * height * width;
    if (raw.size() - offset < count) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': truncated pixel payload");
    }
    ImageArray array;
    array.channels = channels;
    array.height = height;
    array.width = width;
    array.values.resize(count);
    // PNM payload is interleaved (y, x, c); convert to channel-major.
    const unsigned char* pix = reinterpret_cast<const unsigned char*>(raw.data() + offset);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                double v = pix[(static_cast<size_t>(y) * width + x) * channels + c];
                array.at(c, y, x) = v * 2.0 / maxval - 1.0;
            }
        }
    }
    return array;
}

}  // namespace

ImageRecord load_image(const std::string& image_id, const std::filesystem::path& path) {
    ImageRecord record;
    record.image_id = image_id;
    record.uri = path.string();
    std::string ext = path.extension().string();
    if (ext == ".senar") {
        record.pixels = read_array(path);
    } else if (ext == ".pgm" || ext == ".ppm") {
        record.pixels = read_pnm(path);
    } else {
        throw Error(ErrorCode::InvalidArgument,
                    "unsupported image format '" + ext + "' for '" + path.string() + "'");
    }
    validate_image(record);
    return record;
}

bool is_supported_image_file(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    return ext == ".senar" || ext == ".pgm" || ext == ".ppm";
}

std::vector<std::pair<std::string, std::string>> list_image_directory(
    const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::Io, "'" + dir.string() + "' is not a directory");
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_supported_image_file(entry.path())) {
            entries.emplace_back(entry.path().stem().string(), entry.path().string());
        }
    }
    std::sort(entries.begin(), entries.end());
    return entries;
}

std::vector<std::pair<std::string, std::string>> read_image_manifest(
    const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("image_id") || !j.contains("uri")) {
            throw ParseError(line_no, "manifest entry needs image_id and uri");
        }
        entries.emplace_back(j.at("image_id").get<std::string>(),
                             j.at("uri").get<std::string>());
    }
    return entries;
}

ImageStore ImageStore::from_directory(const std::filesystem::path& dir) {
    ImageStore store;
    for (auto& [id, uri] : list_image_directory(dir)) {
        store.add_reference(id, uri);
    }
    return store;
}

ImageStore ImageStore::from_manifest(const std::filesystem::path& path) {
    ImageStore store;
    for (auto& [id, uri] : read_image_manifest(path)) {
        store.add_reference(id, uri);
    }
    return store;
}

ImageStore ImageStore::from_path(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) {
        return from_directory(path);
    }
    return from_manifest(path);
}

void ImageStore::add_record(ImageRecord record) {
    uris_[record.image_id] = record.uri;
    loaded_[record.image_id] = std::move(record);
}

void ImageStore::add_reference(const std::string& image_id, const std::string& uri) {
    uris_[image_id] = uri;
}

bool ImageStore::contains(const std::string& image_id) const {
    return uris_.count(image_id) > 0;
}

const ImageRecord& ImageStore::get(const std::string& image_id) {
    auto hit = loaded_.find(image_id);
    if (hit != loaded_.end()) {
        return hit->second;
    }
    auto uri = uris_.find(image_id);
    if (uri == uris_.end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown image_id '" + image_id + "'");
    }
    loaded_[image_id] = load_image(image_id, uri->second);
    return loaded_[image_id];
}

std::vector<std::string> ImageStore::ids() const {
    std::vector<std::string> out;
    out.reserve(uris_.size());
    for (const auto& [id, uri] : uris_) {
        out.push_back(id);
    }
    return out;
}

}  // namespace sena
