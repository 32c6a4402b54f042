#include "npae/image_io.hpp"

#include <cctype>
#include <cstddef>
#include <vector>

#include "npae/errors.hpp"
#include "npae/util.hpp"

namespace npae {

namespace {

struct PnmHeader {
    int channels = 0;
    int width = 0;
    int height = 0;
    std::size_t data_offset = 0;
};

// Parse "P5"/"P6", then width, height, maxval as whitespace-separated
// tokens with '#' comments, then a single whitespace before the raster.
PnmHeader parse_pnm_header(const std::string& bytes, const std::string& what) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw IoError(what + ": not a binary PGM/PPM file");
    }
    PnmHeader h;
    h.channels = bytes[1] == '5' ? 1 : 3;

    std::size_t pos = 2;
    auto next_token = [&]() -> long {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            throw IoError(what + ": malformed header");
        }
        long v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000'000L) throw IoError(what + ": header value out of range");
            ++pos;
        }
        return v;
    };

    h.width = static_cast<int>(next_token());
    h.height = static_cast<int>(next_token());
    const long maxval = next_token();
    if (h.width < 1 || h.height < 1) throw IoError(what + ": nonpositive extents");
    if (maxval != 255) throw IoError(what + ": only 8-bit maxval 255 is supported");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw IoError(what + ": missing raster separator");
    }
    h.data_offset = pos + 1;
    return h;
}

}  // namespace

void write_image(const std::filesystem::path& path, const Image& image) {
    const int c = image.channels();
    if (c != 1 && c != 3) {
        throw InvalidArgument("write_image supports 1 or 3 channels, got " +
                              std::to_string(c));
    }
    const int h = image.height(), w = image.width();
    std::string bytes;
    bytes += c == 1 ? "P5" : "P6";
    bytes += "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    bytes.reserve(bytes.size() + static_cast<std::size_t>(c) * h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                bytes.push_back(static_cast<char>(intensity_to_pixel(image.pixels.at(ch, y, x))));
    atomic_write_file(path, bytes);
}

Image read_image(const std::filesystem::path& path, std::string id) {
    const std::string bytes = read_file(path);
    const PnmHeader h = parse_pnm_header(bytes, path.string());
    const std::size_t expected = static_cast<std::size_t>(h.channels) * h.width * h.height;
    if (bytes.size() - h.data_offset < expected) {
        throw IoError(path.string() + ": truncated raster data");
    }
    Image image;
    image.id = id.empty() ? path.stem().string() : std::move(id);
    image.pixels = Tensor({h.channels, h.height, h.width});
    const unsigned char* raster =
        reinterpret_cast<const unsigned char*>(bytes.data()) + h.data_offset;
    std::size_t i = 0;
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x)
            for (int ch = 0; ch < h.channels; ++ch)
                image.pixels.at(ch, y, x) = pixel_to_intensity(raster[i++]);
    return image;
}

Tensor resize_bilinear(const Tensor& chw, int out_height, int out_width) {
    if (chw.rank() != 3) throw InvalidArgument("resize_bilinear expects a [C,H,W] tensor");
    if (out_height < 1 || out_width < 1) throw InvalidArgument("resize extents must be positive");
    const int c = chw.extent(0), in_h = chw.extent(1), in_w = chw.extent(2);
    if (in_h == out_height && in_w == out_width) return chw;

    Tensor out({c, out_height, out_width});
    const double sy = static_cast<double>(in_h) / out_height;
    const double sx = static_cast<double>(in_w) / out_width;
    for (int oy = 0; oy < out_height; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        if (fy < 0.0) fy = 0.0;
        int y0 = static_cast<int>(fy);
        if (y0 > in_h - 1) y0 = in_h - 1;
        const int y1 = y0 + 1 < in_h ? y0 + 1 : in_h - 1;
        const double ty = fy - y0;
        for (int ox = 0; ox < out_width; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            if (fx < 0.0) fx = 0.0;
            int x0 = static_cast<int>(fx);
            if (x0 > in_w - 1) x0 = in_w - 1;
            const int x1 = x0 + 1 < in_w ? x0 + 1 : in_w - 1;
            const double tx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double a = chw.at(ch, y0, x0), b = chw.at(ch, y0, x1);
                const double cc = chw.at(ch, y1, x0), d = chw.at(ch, y1, x1);
                const double top = a + tx * (b - a);
                const double bot = cc + tx * (d - cc);
                out.at(ch, oy, ox) = top + ty * (bot - top);
            }
        }
    }
    return out;
}

Tensor convert_channels(const Tensor& chw, int out_channels) {
    if (chw.rank() != 3) throw InvalidArgument("convert_channels expects a [C,H,W] tensor");
    const int c = chw.extent(0), h = chw.extent(1), w = chw.extent(2);
    if (c == out_channels) return chw;
    if (c == 3 && out_channels == 1) {
        Tensor out({1, h, w});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(0, y, x) = 0.299 * chw.at(0, y, x) + 0.587 * chw.at(1, y, x) +
                                  0.114 * chw.at(2, y, x);
        return out;
    }
    if (c == 1 && out_channels == 3) {
        Tensor out({3, h, w});
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out.at(ch, y, x) = chw.at(0, y, x);
        return out;
    }
    throw InvalidArgument("unsupported channel conversion " + std::to_string(c) + " -> " +
                          std::to_string(out_channels));
}

}  // namespace npae
