#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "npae/tensor.hpp"

namespace npae {

/// One image: identifier plus a [C, H, W] tensor of intensities in
/// [-1, 1]. Grayscale is C=1, color is C=3.
struct Image {
    std::string id;
    Tensor pixels;

    int channels() const { return pixels.extent(0); }
    int height() const { return pixels.extent(1); }
    int width() const { return pixels.extent(2); }
};

inline double pixel_to_intensity(std::uint8_t p) {
    return static_cast<double>(p) / 127.5 - 1.0;
}

inline std::uint8_t intensity_to_pixel(double v) {
    const double scaled = std::round((v + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

}  // namespace npae
