#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "npae/image.hpp"
#include "npae/manifest.hpp"
#include "npae/masking.hpp"
#include "npae/rng.hpp"

namespace npae {

/// Procedural face description in canvas fractions (x against width,
/// y against height, radii against the smaller extent). Intensities
/// are in [-1, 1].
struct FaceParams {
    double head_cx = 0.50;
    double head_cy = 0.52;
    double head_rx = 0.30;
    double head_ry = 0.37;
    double eye_y = 0.43;
    double eye_dx = 0.125;  // eye centers at head_cx ± eye_dx
    double eye_r = 0.045;
    double pupil_r = 0.020;
    double brow_lift = 0.075;  // brow height above eye_y
    double nose_len = 0.115;
    double mouth_y = 0.68;
    double mouth_w = 0.125;     // half-width
    double mouth_curve = 0.02;  // positive = smile
    double skin = 0.35;
    double background = -0.65;
    double illumination = 0.0;  // lateral shading gradient
    bool glasses = false;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// The declared typical sampling intervals, field by field.
struct FaceParamIntervals {
    Interval head_cx{0.47, 0.53};
    Interval head_cy{0.49, 0.55};
    Interval head_rx{0.26, 0.33};
    Interval head_ry{0.33, 0.40};
    Interval eye_y{0.40, 0.46};
    Interval eye_dx{0.10, 0.15};
    Interval eye_r{0.035, 0.055};
    Interval pupil_r{0.015, 0.026};
    Interval brow_lift{0.060, 0.090};
    Interval nose_len{0.090, 0.140};
    Interval mouth_y{0.64, 0.72};
    Interval mouth_w{0.090, 0.160};
    Interval mouth_curve{-0.040, 0.050};
    Interval skin{0.25, 0.50};
    Interval background{-0.80, -0.50};
    Interval illumination{-0.25, 0.25};
};

/// Uniform draw of every field from its typical interval. One fixed
/// draw order, so a seed pins the whole face.
FaceParams sample_face_params(Rng& rng);

bool within_typical_intervals(const FaceParams& params);

/// Deterministic rasterization: background, lit head ellipse, brows,
/// eyes with pupils, nose, mouth curve, optional spectacles. Channels
/// must be 1 or 3.
Image render_face(const FaceParams& params, int height, int width, int channels,
                  std::string id);

/// The pixel box containing every stroke the glasses flag can add
/// (rings and bridge), so same-seed variants differ only inside it.
Box eye_region(const FaceParams& params, int height, int width);

enum class AnomalyKind { DisplacedMouth, OversizedEye, OccludingBlock, TextureSwap };

std::string to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(std::string_view text);

struct InjectedAnomaly {
    Image image;
    AnomalyKind kind = AnomalyKind::OccludingBlock;
    Box region;  // every modified pixel lies inside
};

/// Apply one out-of-typical-range defect, confined to the central half
/// of the canvas so the standard feature grid covers it.
InjectedAnomaly inject_anomaly(const Image& image, AnomalyKind kind, std::uint64_t seed);

/// Copy the source box's pixels onto the box shifted by (dy, dx); the
/// shifted box must stay inside the image. A zero shift is the
/// identity.
Image translate_patch(const Image& image, const Box& source, int dy, int dx);

/// One generation cohort: `count` images of one kind, one split, one
/// attribute setting, written under `directory` as <prefix>-NNNNN
/// image files.
struct CorpusSpec {
    std::filesystem::path directory;
    std::string prefix = "img";
    int count = 0;
    std::uint64_t seed = 0;
    int height = 64;
    int width = 64;
    int channels = 1;
    Split split = Split::Train;
    ImageKind kind = ImageKind::Typical;
    bool glasses = false;
    int threads = 1;
};

/// Render and write the cohort. Pure function of the spec: the same
/// spec twice yields bit-identical files. Each image draws from its
/// own seed stream keyed by (seed, prefix, kind, index); anomalies are
/// typical renders passed through inject_anomaly, cycling the four
/// kinds.
Manifest generate_corpus(const CorpusSpec& spec);

}  // namespace npae
