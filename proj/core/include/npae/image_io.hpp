#pragma once

#include <filesystem>
#include <string>

#include "npae/image.hpp"

namespace npae {

/// Write an image as binary PGM (1 channel) or PPM (3 channels),
/// quantizing intensities from [-1, 1] to 8-bit. Atomic: writes a
/// temporary file and renames it into place.
void write_image(const std::filesystem::path& path, const Image& image);

/// Read a binary PGM (P5) or PPM (P6) file into intensities in [-1, 1].
/// The id defaults to the file stem. Throws IoError on malformed input.
Image read_image(const std::filesystem::path& path, std::string id = "");

/// Bilinear resize of a [C, H, W] tensor (half-pixel-center sampling,
/// border clamp). Returns the input unchanged when extents already match.
Tensor resize_bilinear(const Tensor& chw, int out_height, int out_width);

/// Convert between channel conventions: 3->1 uses Rec. 601 luma,
/// 1->3 replicates. Identity when counts match.
Tensor convert_channels(const Tensor& chw, int out_channels);

}  // namespace npae
