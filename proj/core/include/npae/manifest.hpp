#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "npae/image.hpp"

namespace npae {

enum class Split { Train, Holdout, Probe };
enum class ImageKind { Typical, Anomaly, ControlTypical };

std::string to_string(Split split);
std::string to_string(ImageKind kind);
Split split_from_string(std::string_view text);
ImageKind kind_from_string(std::string_view text);

struct ManifestRecord {
    std::string id;
    std::string path;  // relative to the manifest root
    Split split = Split::Train;
    ImageKind kind = ImageKind::Typical;
    std::vector<std::string> attributes;
    std::uint64_t seed = 0;

    bool has_attribute(std::string_view name) const;
};

/// Corpus index: one record per image file under `root`. Ids are
/// unique; an id appears in exactly one split.
struct Manifest {
    std::filesystem::path root;
    std::vector<ManifestRecord> records;
};

/// Tab-separated, one record per line, header line with format version.
void save_manifest(const std::filesystem::path& file, const Manifest& manifest);

/// Loads and validates: header, field count, unique ids, every
/// referenced path exists.
Manifest load_manifest(const std::filesystem::path& file);

/// Read the image file behind one record (intensities in [-1, 1]).
Image load_record_image(const Manifest& manifest, const ManifestRecord& record);

/// Indices of records matching the given split and/or kind, in
/// manifest order.
std::vector<std::size_t> select_records(const Manifest& manifest, std::optional<Split> split,
                                        std::optional<ImageKind> kind = std::nullopt);

struct DirectoryLoad {
    Manifest manifest;
    std::vector<Image> images;  // parallel to manifest.records
    std::vector<std::string> warnings;
};

/// Ingest a directory of PGM/PPM files: decode, convert to `channels`,
/// resize to `height` x `width`, map intensities to [-1, 1]. Files that
/// fail to decode are skipped with a warning; an empty or fully
/// undecodable directory is an error.
DirectoryLoad load_directory(const std::filesystem::path& dir, int height, int width,
                             int channels);

}  // namespace npae
