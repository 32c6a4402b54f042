#include "npae/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "npae/errors.hpp"
#include "npae/image_io.hpp"
#include "npae/util.hpp"

namespace npae {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// 1-px-wide soft edge: full ink at d <= -0.5, none at d >= 0.5.
double coverage(double signed_distance_px) { return clamp01(0.5 - signed_distance_px); }

double mix(double base, double ink, double alpha) { return base + (ink - base) * alpha; }

double disc_distance(double px, double py, double cx, double cy, double r) {
    return std::hypot(px - cx, py - cy) - r;
}

double capsule_distance(double px, double py, double ax, double ay, double bx, double by,
                        double r) {
    const double abx = bx - ax;
    const double aby = by - ay;
    const double apx = px - ax;
    const double apy = py - ay;
    const double len2 = abx * abx + aby * aby;
    const double t = len2 > 0.0 ? clamp01((apx * abx + apy * aby) / len2) : 0.0;
    return std::hypot(apx - t * abx, apy - t * aby) - r;
}

double ring_distance(double px, double py, double cx, double cy, double radius,
                     double half_stroke) {
    return std::abs(std::hypot(px - cx, py - cy) - radius) - half_stroke;
}

struct Canvas {
    int h = 0;
    int w = 0;
    double scale = 0.0;  // pixel unit for radii and lengths
};

double shade_at(const FaceParams& p, const Canvas& c, double px, double py) {
    const double u = px / c.w;
    const double cx = p.head_cx * c.w;
    const double cy = p.head_cy * c.h;
    const double rx = p.head_rx * c.w;
    const double ry = p.head_ry * c.h;

    double g = p.background + 0.25 * p.illumination * (u - 0.5);

    const double e = ((px - cx) / rx) * ((px - cx) / rx) + ((py - cy) / ry) * ((py - cy) / ry);
    const double head_d = (std::sqrt(e) - 1.0) * std::min(rx, ry);
    const double face = p.skin + 0.4 * p.illumination * (px - cx) / rx;
    g = mix(g, face, coverage(head_d));

    const double eye_cy = p.eye_y * c.h;
    const double left_cx = (p.head_cx - p.eye_dx) * c.w;
    const double right_cx = (p.head_cx + p.eye_dx) * c.w;
    const double eye_r = p.eye_r * c.scale;
    const double pupil_r = p.pupil_r * c.scale;

    const double brow_y = (p.eye_y - p.brow_lift) * c.h;
    const double brow_half = 1.3 * eye_r;
    for (double ecx : {left_cx, right_cx}) {
        const double brow_d =
            capsule_distance(px, py, ecx - brow_half, brow_y, ecx + brow_half, brow_y, 0.7);
        g = mix(g, -0.70, coverage(brow_d));
    }
    for (double ecx : {left_cx, right_cx}) {
        g = mix(g, 0.75, coverage(disc_distance(px, py, ecx, eye_cy, eye_r)));
        g = mix(g, -0.85, coverage(disc_distance(px, py, ecx, eye_cy, pupil_r)));
    }

    const double nose_top = (p.eye_y + 0.04) * c.h;
    const double nose_d = capsule_distance(px, py, cx, nose_top, cx, nose_top + p.nose_len * c.h,
                                           0.6);
    g = mix(g, p.skin - 0.30, coverage(nose_d));

    {
        const double mw = p.mouth_w * c.w;
        const double my = p.mouth_y * c.h;
        double mouth_d = 1e9;
        constexpr int kSegments = 32;
        double ax = cx - mw;
        double ay = my + p.mouth_curve * c.h * 0.5;
        for (int s = 1; s <= kSegments; ++s) {
            const double t = -1.0 + 2.0 * s / kSegments;
            const double bx = cx + t * mw;
            const double by = my + p.mouth_curve * c.h * (t * t - 0.5);
            mouth_d = std::min(mouth_d, capsule_distance(px, py, ax, ay, bx, by, 0.8));
            ax = bx;
            ay = by;
        }
        g = mix(g, -0.70, coverage(mouth_d));
    }

    if (p.glasses) {
        const double ring_r = 1.55 * eye_r;
        for (double ecx : {left_cx, right_cx})
            g = mix(g, -0.80, coverage(ring_distance(px, py, ecx, eye_cy, ring_r, 0.6)));
        const double bridge_d = capsule_distance(px, py, left_cx + ring_r, eye_cy,
                                                 right_cx - ring_r, eye_cy, 0.5);
        g = mix(g, -0.80, coverage(bridge_d));
    }
    return std::clamp(g, -1.0, 1.0);
}

void check_canvas(int height, int width, int channels) {
    if (height < 16 || width < 16) throw InvalidArgument("canvas must be at least 16x16");
    if (channels != 1 && channels != 3) throw InvalidArgument("channels must be 1 or 3");
}

void check_image(const Image& image) {
    const auto& shape = image.pixels.shape();
    if (shape.size() != 3) throw InvalidArgument("image tensor must be [C, H, W]");
    if (shape[0] != 1 && shape[0] != 3) throw InvalidArgument("image must have 1 or 3 channels");
}

Box clamp_box(int top, int left, int height, int width, int lo_row, int hi_row, int lo_col,
              int hi_col) {
    const int t = std::max(top, lo_row);
    const int l = std::max(left, lo_col);
    const int b = std::min(top + height, hi_row);
    const int r = std::min(left + width, hi_col);
    if (b <= t || r <= l) throw InvalidArgument("anomaly region fell outside the central area");
    return Box{t, l, b - t, r - l};
}

}  // namespace

FaceParams sample_face_params(Rng& rng) {
    const FaceParamIntervals iv;
    FaceParams p;
    p.head_cx = rng.next_uniform(iv.head_cx.lo, iv.head_cx.hi);
    p.head_cy = rng.next_uniform(iv.head_cy.lo, iv.head_cy.hi);
    p.head_rx = rng.next_uniform(iv.head_rx.lo, iv.head_rx.hi);
    p.head_ry = rng.next_uniform(iv.head_ry.lo, iv.head_ry.hi);
    p.eye_y = rng.next_uniform(iv.eye_y.lo, iv.eye_y.hi);
    p.eye_dx = rng.next_uniform(iv.eye_dx.lo, iv.eye_dx.hi);
    p.eye_r = rng.next_uniform(iv.eye_r.lo, iv.eye_r.hi);
    p.pupil_r = rng.next_uniform(iv.pupil_r.lo, iv.pupil_r.hi);
    p.brow_lift = rng.next_uniform(iv.brow_lift.lo, iv.brow_lift.hi);
    p.nose_len = rng.next_uniform(iv.nose_len.lo, iv.nose_len.hi);
    p.mouth_y = rng.next_uniform(iv.mouth_y.lo, iv.mouth_y.hi);
    p.mouth_w = rng.next_uniform(iv.mouth_w.lo, iv.mouth_w.hi);
    p.mouth_curve = rng.next_uniform(iv.mouth_curve.lo, iv.mouth_curve.hi);
    p.skin = rng.next_uniform(iv.skin.lo, iv.skin.hi);
    p.background = rng.next_uniform(iv.background.lo, iv.background.hi);
    p.illumination = rng.next_uniform(iv.illumination.lo, iv.illumination.hi);
    return p;
}

bool within_typical_intervals(const FaceParams& p) {
    const FaceParamIntervals iv;
    return iv.head_cx.contains(p.head_cx) && iv.head_cy.contains(p.head_cy) &&
           iv.head_rx.contains(p.head_rx) && iv.head_ry.contains(p.head_ry) &&
           iv.eye_y.contains(p.eye_y) && iv.eye_dx.contains(p.eye_dx) &&
           iv.eye_r.contains(p.eye_r) && iv.pupil_r.contains(p.pupil_r) &&
           iv.brow_lift.contains(p.brow_lift) && iv.nose_len.contains(p.nose_len) &&
           iv.mouth_y.contains(p.mouth_y) && iv.mouth_w.contains(p.mouth_w) &&
           iv.mouth_curve.contains(p.mouth_curve) && iv.skin.contains(p.skin) &&
           iv.background.contains(p.background) && iv.illumination.contains(p.illumination);
}

Image render_face(const FaceParams& params, int height, int width, int channels,
                  std::string id) {
    check_canvas(height, width, channels);
    const Canvas canvas{height, width, static_cast<double>(std::min(height, width))};

    Image image;
    image.id = std::move(id);
    image.pixels = Tensor({channels, height, width});
    double* data = image.pixels.data();
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double g = shade_at(params, canvas, x + 0.5, y + 0.5);
            data[static_cast<std::size_t>(y) * width + x] = g;
        }
    }
    for (int c = 1; c < channels; ++c)
        std::copy(data, data + plane, data + c * plane);
    return image;
}

Box eye_region(const FaceParams& params, int height, int width) {
    const double scale = std::min(height, width);
    const double reach = 1.55 * params.eye_r * scale + 0.6 + 2.0;  // ring + stroke + soft edge
    const double cy = params.eye_y * height;
    const double left_cx = (params.head_cx - params.eye_dx) * width;
    const double right_cx = (params.head_cx + params.eye_dx) * width;

    const int top = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int bottom = std::min(height, static_cast<int>(std::ceil(cy + reach)));
    const int left = std::max(0, static_cast<int>(std::floor(left_cx - reach)));
    const int right = std::min(width, static_cast<int>(std::ceil(right_cx + reach)));
    return Box{top, left, bottom - top, right - left};
}

std::string to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::DisplacedMouth: return "displaced-mouth";
        case AnomalyKind::OversizedEye: return "oversized-eye";
        case AnomalyKind::OccludingBlock: return "occluding-block";
        case AnomalyKind::TextureSwap: return "texture-swap";
    }
    throw InvalidArgument("unknown anomaly kind");
}

AnomalyKind anomaly_kind_from_string(std::string_view text) {
    if (text == "displaced-mouth") return AnomalyKind::DisplacedMouth;
    if (text == "oversized-eye") return AnomalyKind::OversizedEye;
    if (text == "occluding-block") return AnomalyKind::OccludingBlock;
    if (text == "texture-swap") return AnomalyKind::TextureSwap;
    throw InvalidArgument("unknown anomaly kind: " + std::string(text));
}

Image translate_patch(const Image& image, const Box& source, int dy, int dx) {
    check_image(image);
    const auto& shape = image.pixels.shape();
    const int channels = static_cast<int>(shape[0]);
    const int h = static_cast<int>(shape[1]);
    const int w = static_cast<int>(shape[2]);
    validate_box(source, h, w);
    const Box dest{source.top + dy, source.left + dx, source.height, source.width};
    validate_box(dest, h, w);

    Image out = image;
    std::vector<double> patch(static_cast<std::size_t>(channels) * source.height * source.width);
    const double* src = image.pixels.data();
    std::size_t k = 0;
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < source.height; ++y)
            for (int x = 0; x < source.width; ++x)
                patch[k++] = src[(static_cast<std::size_t>(c) * h + source.top + y) * w +
                                 source.left + x];
    double* dst = out.pixels.data();
    k = 0;
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < dest.height; ++y)
            for (int x = 0; x < dest.width; ++x)
                dst[(static_cast<std::size_t>(c) * h + dest.top + y) * w + dest.left + x] =
                    patch[k++];
    return out;
}

InjectedAnomaly inject_anomaly(const Image& image, AnomalyKind kind, std::uint64_t seed) {
    check_image(image);
    const auto& shape = image.pixels.shape();
    const int channels = static_cast<int>(shape[0]);
    const int h = static_cast<int>(shape[1]);
    const int w = static_cast<int>(shape[2]);
    if (h < 32 || w < 32) throw InvalidArgument("image too small for anomaly injection");

    // The central half of the canvas, matching the default feature grid.
    const int row_lo = h / 4;
    const int row_hi = h - h / 4;
    const int col_lo = w / 4;
    const int col_hi = w - w / 4;

    Rng rng(seed);
    InjectedAnomaly out;
    out.kind = kind;

    switch (kind) {
        case AnomalyKind::OccludingBlock: {
            const int bh = static_cast<int>(rng.next_int(h / 6, h / 3));
            const int bw = static_cast<int>(rng.next_int(w / 6, w / 3));
            const int top = static_cast<int>(rng.next_int(row_lo, row_hi - bh));
            const int left = static_cast<int>(rng.next_int(col_lo, col_hi - bw));
            const double sign = (rng.next_u64() & 1) ? 1.0 : -1.0;
            const double shade = sign * rng.next_uniform(0.70, 0.95);
            out.region = Box{top, left, bh, bw};
            out.image = image;
            double* data = out.image.pixels.data();
            for (int c = 0; c < channels; ++c)
                for (int y = top; y < top + bh; ++y)
                    for (int x = left; x < left + bw; ++x)
                        data[(static_cast<std::size_t>(c) * h + y) * w + x] = shade;
            return out;
        }
        case AnomalyKind::DisplacedMouth: {
            const int sh = std::max(4, static_cast<int>(std::lround(0.17 * h)));
            const int sw = std::max(4, static_cast<int>(std::lround(0.36 * w)));
            const int stop = static_cast<int>(std::lround(0.60 * h));
            const int sleft = static_cast<int>(std::lround(0.32 * w));
            // Shift the copy up toward the nose and sideways, landing it
            // fully inside the central area.
            const int dy = -static_cast<int>(rng.next_int(std::lround(0.14 * h),
                                                          std::lround(0.20 * h)));
            int dx = static_cast<int>(rng.next_int(-std::lround(0.06 * w),
                                                   std::lround(0.06 * w)));
            dx = std::clamp(dx, col_lo - sleft, col_hi - sw - sleft);
            const int dyc = std::clamp(stop + dy, row_lo, row_hi - sh) - stop;
            out.image = translate_patch(image, Box{stop, sleft, sh, sw}, dyc, dx);
            out.region = Box{stop + dyc, sleft + dx, sh, sw};
            return out;
        }
        case AnomalyKind::OversizedEye: {
            const double side = (rng.next_u64() & 1) ? 1.0 : -1.0;
            const double factor = rng.next_uniform(1.6, 2.0);
            const double cx = (0.5 + side * 0.125) * w;
            const double cy = 0.43 * h;
            const double src_half = 0.09 * std::min(h, w);
            const double dst_half = src_half * factor;
            out.region = clamp_box(static_cast<int>(std::floor(cy - dst_half)),
                                   static_cast<int>(std::floor(cx - dst_half)),
                                   static_cast<int>(std::ceil(2 * dst_half)),
                                   static_cast<int>(std::ceil(2 * dst_half)), row_lo, row_hi,
                                   col_lo, col_hi);
            out.image = image;
            const double* src = image.pixels.data();
            double* dst = out.image.pixels.data();
            for (int c = 0; c < channels; ++c) {
                const double* plane = src + static_cast<std::size_t>(c) * h * w;
                for (int y = out.region.top; y < out.region.top + out.region.height; ++y) {
                    for (int x = out.region.left; x < out.region.left + out.region.width; ++x) {
                        const double sy =
                            std::clamp(cy + (y + 0.5 - cy) / factor - 0.5, 0.0, h - 1.0);
                        const double sx =
                            std::clamp(cx + (x + 0.5 - cx) / factor - 0.5, 0.0, w - 1.0);
                        const int y0 = static_cast<int>(sy);
                        const int x0 = static_cast<int>(sx);
                        const int y1 = std::min(y0 + 1, h - 1);
                        const int x1 = std::min(x0 + 1, w - 1);
                        const double fy = sy - y0;
                        const double fx = sx - x0;
                        const double top_row = plane[y0 * w + x0] +
                                               (plane[y0 * w + x1] - plane[y0 * w + x0]) * fx;
                        const double bot_row = plane[y1 * w + x0] +
                                               (plane[y1 * w + x1] - plane[y1 * w + x0]) * fx;
                        dst[(static_cast<std::size_t>(c) * h + y) * w + x] =
                            top_row + (bot_row - top_row) * fy;
                    }
                }
            }
            return out;
        }
        case AnomalyKind::TextureSwap: {
            const int bh = static_cast<int>(rng.next_int(h / 6, h / 3));
            const int bw = static_cast<int>(rng.next_int(w / 6, w / 3));
            const int top = static_cast<int>(rng.next_int(row_lo, row_hi - bh));
            const int left = static_cast<int>(rng.next_int(col_lo, col_hi - bw));
            const double fx = rng.next_uniform(0.25, 0.45);
            const double fy = rng.next_uniform(0.25, 0.45);
            const double phase = rng.next_uniform(0.0, 2.0 * kPi);
            out.region = Box{top, left, bh, bw};
            out.image = image;
            double* data = out.image.pixels.data();
            for (int c = 0; c < channels; ++c)
                for (int y = top; y < top + bh; ++y)
                    for (int x = left; x < left + bw; ++x)
                        data[(static_cast<std::size_t>(c) * h + y) * w + x] =
                            0.75 * std::sin(2.0 * kPi * (fx * x + fy * y) + phase);
            return out;
        }
    }
    throw InvalidArgument("unknown anomaly kind");
}

Manifest generate_corpus(const CorpusSpec& spec) {
    if (spec.count < 1) throw InvalidArgument("corpus count must be at least 1");
    if (spec.directory.empty()) throw InvalidArgument("corpus directory not set");
    check_canvas(spec.height, spec.width, spec.channels);
    if (spec.kind == ImageKind::Anomaly && (spec.height < 32 || spec.width < 32))
        throw InvalidArgument("anomaly corpus needs at least a 32x32 canvas");

    std::error_code ec;
    std::filesystem::create_directories(spec.directory, ec);
    if (ec) throw IoError("cannot create " + spec.directory.string() + ": " + ec.message());

    const std::string stream = "face:" + spec.prefix + ":" + to_string(spec.kind);
    constexpr AnomalyKind kCycle[] = {AnomalyKind::DisplacedMouth, AnomalyKind::OversizedEye,
                                      AnomalyKind::OccludingBlock, AnomalyKind::TextureSwap};

    Manifest manifest;
    manifest.root = spec.directory;
    manifest.records.resize(static_cast<std::size_t>(spec.count));
    std::vector<Image> images(static_cast<std::size_t>(spec.count));

    parallel_for(spec.count, spec.threads, [&](std::int64_t i) {
        const std::uint64_t image_seed =
            derive_seed(spec.seed, stream, static_cast<std::uint64_t>(i));
        char name[64];
        std::snprintf(name, sizeof(name), "%s-%05lld", spec.prefix.c_str(),
                      static_cast<long long>(i));

        Rng rng(image_seed);
        FaceParams params = sample_face_params(rng);
        params.glasses = spec.glasses;
        Image face = render_face(params, spec.height, spec.width, spec.channels, name);

        ManifestRecord record;
        record.id = name;
        record.path = std::string(name) + (spec.channels == 3 ? ".ppm" : ".pgm");
        record.split = spec.split;
        record.kind = spec.kind;
        record.seed = image_seed;
        if (spec.glasses) record.attributes.push_back("glasses");

        if (spec.kind == ImageKind::Anomaly) {
            const AnomalyKind akind = kCycle[i % 4];
            InjectedAnomaly injected =
                inject_anomaly(face, akind, derive_seed(image_seed, "inject"));
            injected.image.id = record.id;
            face = std::move(injected.image);
            record.attributes.push_back(to_string(akind));
        }
        images[static_cast<std::size_t>(i)] = std::move(face);
        manifest.records[static_cast<std::size_t>(i)] = std::move(record);
    });

    for (std::size_t i = 0; i < images.size(); ++i)
        write_image(spec.directory / manifest.records[i].path, images[i]);
    return manifest;
}

}  // namespace npae
