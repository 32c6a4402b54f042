#pragma once

#include <vector>

#include "npae/image.hpp"
#include "npae/rng.hpp"
#include "npae/tensor.hpp"

namespace npae {

/// Axis-aligned pixel rectangle, the mask region b.
struct Box {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;

    bool operator==(const Box&) const = default;
};

/// Throws InvalidArgument unless the box is nonempty and fully inside
/// an image of the given extents.
void validate_box(const Box& b, int image_height, int image_width);

/// Regular test-time grid of boxes, row-major order.
struct BoxGrid {
    int image_height = 0;
    int image_width = 0;
    int box_height = 0;
    int box_width = 0;
    int stride = 0;
    int edge_exclusion = 0;
    std::vector<Box> boxes;
};

/// Zero the pixels inside b on all channels, in place.
void zero_box(Tensor& chw, const Box& b);

/// Zero the pixels outside b on all channels, in place.
void zero_complement(Tensor& chw, const Box& b);

/// The operator Π_b: pixels inside b become 0, the rest are unchanged.
Image apply_box_mask(const Image& image, const Box& b);

/// The operator Π_b̄: pixels outside b become 0, the box is unchanged.
Image apply_complement_mask(const Image& image, const Box& b);

/// All boxes whose top-left lies on the stride lattice anchored at
/// (edge_exclusion, edge_exclusion) and whose full extent stays at
/// least edge_exclusion away from every image edge. Throws
/// EmptyGridError when no box is admissible.
BoxGrid grid_boxes(int image_height, int image_width, int box_height, int box_width, int stride,
                   int edge_exclusion);

/// Random training-time box: each side uniform in [size_lo, size_hi],
/// position uniform over all in-bounds placements. Draw order is
/// height, width, top, left.
Box sample_random_box(int image_height, int image_width, int size_lo, int size_hi, Rng& rng);

}  // namespace npae
