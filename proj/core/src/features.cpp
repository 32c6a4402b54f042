#include "npae/features.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "npae/errors.hpp"
#include "npae/util.hpp"

namespace npae {

namespace {

void require_grid_match(const Autoencoder& model, const Image& image, const BoxGrid& grid) {
    const ArchConfig& arch = model.config();
    if (image.channels() != arch.channels || image.height() != arch.height ||
        image.width() != arch.width) {
        throw InvalidArgument("image '" + image.id + "' extents do not match the model");
    }
    if (grid.image_height != arch.height || grid.image_width != arch.width) {
        throw InvalidArgument("box grid extents do not match the model");
    }
}

double box_mean_abs_residual(const Tensor& reconstruction, const Tensor& original, const Box& b,
                             std::int64_t batch_index) {
    const int c = original.extent(0), h = original.extent(1), w = original.extent(2);
    const double* rec = reconstruction.data() + batch_index * c * h * w;
    double acc = 0.0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = b.top; y < b.top + b.height; ++y)
            for (int x = b.left; x < b.left + b.width; ++x) {
                const std::int64_t k = (static_cast<std::int64_t>(ch) * h + y) * w + x;
                acc += std::abs(rec[k] - original[k]);
            }
    return acc / (static_cast<double>(c) * b.height * b.width);
}

std::string format_value(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::InpaintResidual: return "inpaint-residual";
        case FeatureKind::RawResidual: return "raw-residual";
        case FeatureKind::Code: return "code";
    }
    return "inpaint-residual";
}

FeatureKind feature_kind_from_string(std::string_view text) {
    if (text == "inpaint-residual") return FeatureKind::InpaintResidual;
    if (text == "raw-residual") return FeatureKind::RawResidual;
    if (text == "code") return FeatureKind::Code;
    throw InvalidArgument("unknown feature kind '" + std::string(text) + "'");
}

FeatureVector inpaint_residual_features(const Autoencoder& model, const Image& image,
                                        const BoxGrid& grid) {
    require_grid_match(model, image, grid);
    const int g = static_cast<int>(grid.boxes.size());
    const ArchConfig& arch = model.config();

    // One masked copy of the image per box, reconstructed as a batch.
    Tensor batch({g, arch.channels, arch.height, arch.width});
    const std::int64_t image_size = image.pixels.size();
    for (int i = 0; i < g; ++i) {
        double* dst = batch.data() + i * image_size;
        std::copy(image.pixels.data(), image.pixels.data() + image_size, dst);
        const Box& b = grid.boxes[static_cast<std::size_t>(i)];
        for (int ch = 0; ch < arch.channels; ++ch)
            for (int y = b.top; y < b.top + b.height; ++y)
                for (int x = b.left; x < b.left + b.width; ++x)
                    dst[(static_cast<std::int64_t>(ch) * arch.height + y) * arch.width + x] = 0.0;
    }
    const Tensor recon = model.reconstruct_batch(batch);

    FeatureVector fv;
    fv.kind = FeatureKind::InpaintResidual;
    fv.image_id = image.id;
    fv.values.resize(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i) {
        fv.values[static_cast<std::size_t>(i)] =
            box_mean_abs_residual(recon, image.pixels, grid.boxes[static_cast<std::size_t>(i)], i);
    }
    return fv;
}

FeatureVector raw_residual_features(const Autoencoder& model, const Image& image,
                                    const BoxGrid& grid) {
    require_grid_match(model, image, grid);
    const ArchConfig& arch = model.config();
    const Tensor recon = model.reconstruct_batch(
        image.pixels.reshaped({1, arch.channels, arch.height, arch.width}));

    FeatureVector fv;
    fv.kind = FeatureKind::RawResidual;
    fv.image_id = image.id;
    fv.values.reserve(grid.boxes.size());
    for (const Box& b : grid.boxes) {
        fv.values.push_back(box_mean_abs_residual(recon, image.pixels, b, 0));
    }
    return fv;
}

FeatureVector code_features(const Autoencoder& model, const Image& image) {
    FeatureVector fv;
    fv.kind = FeatureKind::Code;
    fv.image_id = image.id;
    fv.values = model.encode(image);
    return fv;
}

ResidualMap residual_map(const Autoencoder& model, const Image& image, const Box& b) {
    const ArchConfig& arch = model.config();
    if (image.channels() != arch.channels || image.height() != arch.height ||
        image.width() != arch.width) {
        throw InvalidArgument("image '" + image.id + "' extents do not match the model");
    }
    const Image inpainted = model.inpaint(image, b);
    ResidualMap map;
    map.box = b;
    map.pixels = Tensor(image.pixels.shape());
    for (int ch = 0; ch < arch.channels; ++ch)
        for (int y = b.top; y < b.top + b.height; ++y)
            for (int x = b.left; x < b.left + b.width; ++x)
                map.pixels.at(ch, y, x) =
                    std::abs(inpainted.pixels.at(ch, y, x) - image.pixels.at(ch, y, x));
    return map;
}

FeatureMatrix extract_features(const Autoencoder& model, FeatureKind kind,
                               const std::vector<Image>& images, const BoxGrid& grid,
                               int threads) {
    FeatureMatrix matrix;
    matrix.kind = kind;
    matrix.image_height = model.config().height;
    matrix.image_width = model.config().width;
    if (kind != FeatureKind::Code) {
        matrix.box_height = grid.box_height;
        matrix.box_width = grid.box_width;
        matrix.stride = grid.stride;
        matrix.edge_exclusion = grid.edge_exclusion;
        matrix.dimension = static_cast<int>(grid.boxes.size());
    } else {
        matrix.dimension = model.config().code_dim;
    }
    matrix.ids.resize(images.size());
    matrix.values.resize(images.size());

    parallel_for(static_cast<std::int64_t>(images.size()), threads, [&](std::int64_t i) {
        const Image& image = images[static_cast<std::size_t>(i)];
        FeatureVector fv;
        switch (kind) {
            case FeatureKind::InpaintResidual:
                fv = inpaint_residual_features(model, image, grid);
                break;
            case FeatureKind::RawResidual:
                fv = raw_residual_features(model, image, grid);
                break;
            case FeatureKind::Code:
                fv = code_features(model, image);
                break;
        }
        matrix.ids[static_cast<std::size_t>(i)] = fv.image_id;
        matrix.values[static_cast<std::size_t>(i)] = std::move(fv.values);
    });
    return matrix;
}

void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& matrix) {
    std::ostringstream out;
    out << "npae-features\t1\t" << to_string(matrix.kind) << '\t' << matrix.image_height << 'x'
        << matrix.image_width << '\t' << matrix.box_height << 'x' << matrix.box_width << '\t'
        << matrix.stride << '\t' << matrix.edge_exclusion << '\t' << matrix.dimension << '\n';
    for (std::size_t i = 0; i < matrix.ids.size(); ++i) {
        out << matrix.ids[i];
        for (double v : matrix.values[i]) out << ',' << format_value(v);
        out << '\n';
    }
    atomic_write_file(path, out.str());
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty feature file");

    FeatureMatrix matrix;
    {
        std::istringstream header(line);
        std::string tag, kind, image_wh, box_wh;
        int version = 0;
        if (!(header >> tag >> version >> kind >> image_wh >> box_wh >> matrix.stride >>
              matrix.edge_exclusion >> matrix.dimension) ||
            tag != "npae-features" || version != 1) {
            throw IoError(path.string() + ": bad feature file header");
        }
        matrix.kind = feature_kind_from_string(kind);
        if (std::sscanf(image_wh.c_str(), "%dx%d", &matrix.image_height, &matrix.image_width) != 2 ||
            std::sscanf(box_wh.c_str(), "%dx%d", &matrix.box_height, &matrix.box_width) != 2) {
            throw IoError(path.string() + ": bad extents in feature header");
        }
    }

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id;
        if (!std::getline(row, id, ',')) throw IoError(path.string() + ": malformed record");
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(matrix.dimension));
        std::string cell;
        while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
        if (static_cast<int>(values.size()) != matrix.dimension) {
            throw IoError(path.string() + ": record '" + id + "' has wrong dimension");
        }
        matrix.ids.push_back(std::move(id));
        matrix.values.push_back(std::move(values));
    }
    return matrix;
}

}  // namespace npae
