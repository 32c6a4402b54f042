#include "npae/masking.hpp"

#include <string>

#include "npae/errors.hpp"

namespace npae {

void validate_box(const Box& b, int image_height, int image_width) {
    if (b.height < 1 || b.width < 1) {
        throw InvalidArgument("box extents must be at least 1x1");
    }
    if (b.top < 0 || b.left < 0 || b.top + b.height > image_height ||
        b.left + b.width > image_width) {
        throw InvalidArgument("box (" + std::to_string(b.top) + "," + std::to_string(b.left) + "," +
                              std::to_string(b.height) + "," + std::to_string(b.width) +
                              ") not contained in " + std::to_string(image_height) + "x" +
                              std::to_string(image_width) + " image");
    }
}

void zero_box(Tensor& chw, const Box& b) {
    if (chw.rank() != 3) throw InvalidArgument("masking expects a [C,H,W] tensor");
    validate_box(b, chw.extent(1), chw.extent(2));
    for (int c = 0; c < chw.extent(0); ++c)
        for (int y = b.top; y < b.top + b.height; ++y)
            for (int x = b.left; x < b.left + b.width; ++x) chw.at(c, y, x) = 0.0;
}

void zero_complement(Tensor& chw, const Box& b) {
    if (chw.rank() != 3) throw InvalidArgument("masking expects a [C,H,W] tensor");
    validate_box(b, chw.extent(1), chw.extent(2));
    for (int c = 0; c < chw.extent(0); ++c)
        for (int y = 0; y < chw.extent(1); ++y)
            for (int x = 0; x < chw.extent(2); ++x) {
                const bool inside = y >= b.top && y < b.top + b.height && x >= b.left &&
                                    x < b.left + b.width;
                if (!inside) chw.at(c, y, x) = 0.0;
            }
}

Image apply_box_mask(const Image& image, const Box& b) {
    Image out = image;
    zero_box(out.pixels, b);
    return out;
}

Image apply_complement_mask(const Image& image, const Box& b) {
    Image out = image;
    zero_complement(out.pixels, b);
    return out;
}

BoxGrid grid_boxes(int image_height, int image_width, int box_height, int box_width, int stride,
                   int edge_exclusion) {
    if (stride < 1) throw InvalidArgument("grid stride must be at least 1");
    if (box_height < 1 || box_width < 1) throw InvalidArgument("grid box extents must be positive");
    if (edge_exclusion < 0) throw InvalidArgument("edge exclusion must be nonnegative");

    BoxGrid grid;
    grid.image_height = image_height;
    grid.image_width = image_width;
    grid.box_height = box_height;
    grid.box_width = box_width;
    grid.stride = stride;
    grid.edge_exclusion = edge_exclusion;

    for (int top = edge_exclusion; top + box_height <= image_height - edge_exclusion;
         top += stride) {
        for (int left = edge_exclusion; left + box_width <= image_width - edge_exclusion;
             left += stride) {
            grid.boxes.push_back(Box{top, left, box_height, box_width});
        }
    }
    if (grid.boxes.empty()) {
        throw EmptyGridError("no admissible box: " + std::to_string(box_height) + "x" +
                             std::to_string(box_width) + " boxes, exclusion " +
                             std::to_string(edge_exclusion) + ", in " +
                             std::to_string(image_height) + "x" + std::to_string(image_width));
    }
    return grid;
}

Box sample_random_box(int image_height, int image_width, int size_lo, int size_hi, Rng& rng) {
    if (size_lo < 1 || size_lo > size_hi || size_hi > image_height || size_hi > image_width) {
        throw InvalidArgument("infeasible box size range [" + std::to_string(size_lo) + ", " +
                              std::to_string(size_hi) + "] for " + std::to_string(image_height) +
                              "x" + std::to_string(image_width));
    }
    Box b;
    b.height = static_cast<int>(rng.next_int(size_lo, size_hi));
    b.width = static_cast<int>(rng.next_int(size_lo, size_hi));
    b.top = static_cast<int>(rng.next_int(0, image_height - b.height));
    b.left = static_cast<int>(rng.next_int(0, image_width - b.width));
    return b;
}

}  // namespace npae
