#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "npae/autoencoder.hpp"
#include "npae/image.hpp"
#include "npae/masking.hpp"

namespace npae {

enum class FeatureKind { InpaintResidual, RawResidual, Code };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

/// One image's anomaly features. For box-indexed kinds the values are
/// per-box mean absolute residuals in grid order; for the code kind
/// they are the encoder output.
struct FeatureVector {
    FeatureKind kind = FeatureKind::InpaintResidual;
    std::string image_id;
    std::vector<double> values;
};

/// |Π_b̄[D(E(Π_b(Q))) - Q]| reduced per box: the no-peeking feature.
FeatureVector inpaint_residual_features(const Autoencoder& model, const Image& image,
                                        const BoxGrid& grid);

/// Same per-box reduction of the unmasked reconstruction residual
/// D(E(Q)) - Q: the peeking baseline.
FeatureVector raw_residual_features(const Autoencoder& model, const Image& image,
                                    const BoxGrid& grid);

/// The encoder's code vector as a feature.
FeatureVector code_features(const Autoencoder& model, const Image& image);

/// Per-pixel absolute inpainting residual, zero outside b.
struct ResidualMap {
    Box box;
    Tensor pixels;  // [C, H, W]
};

ResidualMap residual_map(const Autoencoder& model, const Image& image, const Box& b);

/// Feature vectors for a whole corpus, one row per image.
struct FeatureMatrix {
    FeatureKind kind = FeatureKind::InpaintResidual;
    int image_height = 0;
    int image_width = 0;
    int box_height = 0;
    int box_width = 0;
    int stride = 0;
    int edge_exclusion = 0;
    int dimension = 0;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> values;
};

/// Extract features for every image, parallel across images. The grid
/// is ignored for the code kind.
FeatureMatrix extract_features(const Autoencoder& model, FeatureKind kind,
                               const std::vector<Image>& images, const BoxGrid& grid,
                               int threads = 1);

/// Text format: header naming kind, grid parameters and dimension, then
/// one record per image (id, comma-separated values, 9 significant
/// digits).
void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& matrix);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

}  // namespace npae
