#include "npae/manifest.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "npae/errors.hpp"
#include "npae/image_io.hpp"
#include "npae/util.hpp"

namespace npae {

namespace {

constexpr std::string_view kHeader = "npae-manifest\t1";

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string join_attributes(const std::vector<std::string>& attrs) {
    if (attrs.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (i) out += ',';
        out += attrs[i];
    }
    return out;
}

std::vector<std::string> parse_attributes(const std::string& field) {
    if (field == "-" || field.empty()) return {};
    return split_fields(field, ',');
}

}  // namespace

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Holdout: return "holdout";
        case Split::Probe: return "probe";
    }
    return "train";
}

std::string to_string(ImageKind kind) {
    switch (kind) {
        case ImageKind::Typical: return "typical";
        case ImageKind::Anomaly: return "anomaly";
        case ImageKind::ControlTypical: return "control-typical";
    }
    return "typical";
}

Split split_from_string(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "holdout") return Split::Holdout;
    if (text == "probe") return Split::Probe;
    throw InvalidArgument("unknown split '" + std::string(text) + "'");
}

ImageKind kind_from_string(std::string_view text) {
    if (text == "typical") return ImageKind::Typical;
    if (text == "anomaly") return ImageKind::Anomaly;
    if (text == "control-typical") return ImageKind::ControlTypical;
    throw InvalidArgument("unknown image kind '" + std::string(text) + "'");
}

bool ManifestRecord::has_attribute(std::string_view name) const {
    return std::find(attributes.begin(), attributes.end(), name) != attributes.end();
}

void save_manifest(const std::filesystem::path& file, const Manifest& manifest) {
    std::ostringstream out;
    out << kHeader << '\n';
    for (const auto& r : manifest.records) {
        out << r.id << '\t' << r.path << '\t' << to_string(r.split) << '\t' << to_string(r.kind)
            << '\t' << join_attributes(r.attributes) << '\t' << r.seed << '\n';
    }
    atomic_write_file(file, out.str());
}

Manifest load_manifest(const std::filesystem::path& file) {
    const std::string text = read_file(file);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kHeader) {
        throw IoError(file.string() + ": missing or unsupported manifest header");
    }

    Manifest manifest;
    manifest.root = file.parent_path();
    std::set<std::string> seen_ids;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line, '\t');
        if (fields.size() != 6) {
            throw IoError(file.string() + ":" + std::to_string(line_no) +
                          ": expected 6 tab-separated fields");
        }
        ManifestRecord r;
        r.id = fields[0];
        r.path = fields[1];
        r.split = split_from_string(fields[2]);
        r.kind = kind_from_string(fields[3]);
        r.attributes = parse_attributes(fields[4]);
        r.seed = std::stoull(fields[5]);
        if (!seen_ids.insert(r.id).second) {
            throw IoError(file.string() + ": duplicate image id '" + r.id + "'");
        }
        if (!std::filesystem::exists(manifest.root / r.path)) {
            throw IoError(file.string() + ": referenced image missing: " + r.path);
        }
        manifest.records.push_back(std::move(r));
    }
    return manifest;
}

Image load_record_image(const Manifest& manifest, const ManifestRecord& record) {
    return read_image(manifest.root / record.path, record.id);
}

std::vector<std::size_t> select_records(const Manifest& manifest, std::optional<Split> split,
                                        std::optional<ImageKind> kind) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (split && r.split != *split) continue;
        if (kind && r.kind != *kind) continue;
        out.push_back(i);
    }
    return out;
}

DirectoryLoad load_directory(const std::filesystem::path& dir, int height, int width,
                             int channels) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw EmptyManifestError("no PGM/PPM files in " + dir.string());
    }

    DirectoryLoad result;
    result.manifest.root = dir;
    std::set<std::string> seen_ids;
    for (const auto& file : files) {
        try {
            Image image = read_image(file);
            if (!seen_ids.insert(image.id).second) image.id = file.filename().string();
            seen_ids.insert(image.id);
            image.pixels = resize_bilinear(convert_channels(image.pixels, channels), height, width);
            ManifestRecord r;
            r.id = image.id;
            r.path = file.filename().string();
            r.split = Split::Train;
            r.kind = ImageKind::Typical;
            result.manifest.records.push_back(std::move(r));
            result.images.push_back(std::move(image));
        } catch (const Error& e) {
            result.warnings.push_back(std::string("skipped ") + file.filename().string() + ": " +
                                      e.what());
        }
    }
    if (result.images.empty()) {
        throw EmptyManifestError("no decodable images in " + dir.string() + " (" +
                                 std::to_string(result.warnings.size()) + " skipped)");
    }
    return result;
}

}  // namespace npae
