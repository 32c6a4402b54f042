#include "npae/lfdr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "npae/errors.hpp"
#include "npae/util.hpp"

namespace npae {

namespace {

constexpr int kGridSize = 512;
constexpr double kDensityFloor = 1e-12;

double standard_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

LfdrModel fit_lfdr(const std::vector<double>& scores, bool use_log) {
    if (scores.size() < 200) {
        throw InvalidArgument("fit_lfdr needs at least 200 scores, got " +
                              std::to_string(scores.size()));
    }
    LfdrModel model;
    model.use_log = use_log;

    std::vector<double> t(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (use_log) {
            if (scores[i] <= 0.0) {
                throw InvalidArgument("log-scale lfdr requires strictly positive scores");
            }
            t[i] = std::log(scores[i]);
        } else {
            t[i] = scores[i];
        }
    }

    std::vector<double> sorted = t;
    std::sort(sorted.begin(), sorted.end());
    model.location = quantile(sorted, 0.5);
    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    model.scale = std::max(iqr / 1.349, 1e-12);

    std::vector<double> z(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) z[i] = (t[i] - model.location) / model.scale;

    const double n = static_cast<double>(z.size());
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    const double sd = std::sqrt(std::max(var, 1e-24));
    const double sorted_iqr_z = iqr / model.scale / 1.349;  // ≈ 1 by construction
    const double spread = std::min(sd, sorted_iqr_z > 0.0 ? sorted_iqr_z : sd);
    model.bandwidth = std::max(0.9 * spread * std::pow(n, -0.2), 1e-6);

    const double z_lo = *std::min_element(z.begin(), z.end()) - 3.0 * model.bandwidth;
    const double z_hi = *std::max_element(z.begin(), z.end()) + 3.0 * model.bandwidth;
    model.grid_z.resize(kGridSize);
    model.grid_f.resize(kGridSize);
    for (int g = 0; g < kGridSize; ++g) {
        model.grid_z[static_cast<std::size_t>(g)] =
            z_lo + (z_hi - z_lo) * g / (kGridSize - 1);
    }
    const double inv_nh = 1.0 / (n * model.bandwidth);
    for (int g = 0; g < kGridSize; ++g) {
        const double zg = model.grid_z[static_cast<std::size_t>(g)];
        double acc = 0.0;
        for (double zi : z) acc += standard_normal_pdf((zg - zi) / model.bandwidth);
        model.grid_f[static_cast<std::size_t>(g)] = acc * inv_nh;
    }

    std::size_t mode_index = 0;
    for (std::size_t g = 1; g < model.grid_f.size(); ++g) {
        if (model.grid_f[g] > model.grid_f[mode_index]) mode_index = g;
    }
    model.mode_z = model.grid_z[mode_index];
    model.pi0 = std::min(1.0, model.grid_f[mode_index] / standard_normal_pdf(model.mode_z));

    model.grid_lfdr.resize(model.grid_z.size());
    for (std::size_t g = 0; g < model.grid_z.size(); ++g) {
        const double f = std::max(model.grid_f[g], kDensityFloor);
        model.grid_lfdr[g] =
            std::min(1.0, model.pi0 * standard_normal_pdf(model.grid_z[g]) / f);
    }
    // Monotone non-increasing outward from the mode: without this the
    // estimate snaps back to 1 beyond the data support, where the
    // kernel estimate decays faster than the null.
    for (std::size_t g = mode_index + 1; g < model.grid_lfdr.size(); ++g) {
        model.grid_lfdr[g] = std::min(model.grid_lfdr[g], model.grid_lfdr[g - 1]);
    }
    for (std::size_t g = mode_index; g-- > 0;) {
        model.grid_lfdr[g] = std::min(model.grid_lfdr[g], model.grid_lfdr[g + 1]);
    }
    return model;
}

double lfdr_value(const LfdrModel& model, double score) {
    if (model.grid_z.empty()) throw InvalidArgument("lfdr model is not fitted");
    double t = score;
    if (model.use_log) {
        if (score <= 0.0) return 1.0;  // below any positive score seen: fully typical
        t = std::log(score);
    }
    const double z = (t - model.location) / model.scale;

    if (z <= model.grid_z.front()) return model.grid_lfdr.front();
    if (z >= model.grid_z.back()) return model.grid_lfdr.back();
    const auto it = std::upper_bound(model.grid_z.begin(), model.grid_z.end(), z);
    const std::size_t hi = static_cast<std::size_t>(it - model.grid_z.begin());
    const std::size_t lo = hi - 1;
    const double span = model.grid_z[hi] - model.grid_z[lo];
    const double frac = span > 0.0 ? (z - model.grid_z[lo]) / span : 0.0;
    return model.grid_lfdr[lo] + frac * (model.grid_lfdr[hi] - model.grid_lfdr[lo]);
}

double lfdr_score(const LfdrModel& model, double score) {
    return 1.0 - lfdr_value(model, score);
}

void save_lfdr_model(const std::filesystem::path& path, const LfdrModel& model) {
    std::ostringstream out;
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    out << "npae-lfdr\t1\n";
    out << "use_log\t" << (model.use_log ? 1 : 0) << '\n';
    out << "location\t" << fmt(model.location) << '\n';
    out << "scale\t" << fmt(model.scale) << '\n';
    out << "bandwidth\t" << fmt(model.bandwidth) << '\n';
    out << "pi0\t" << fmt(model.pi0) << '\n';
    out << "mode_z\t" << fmt(model.mode_z) << '\n';
    out << "grid\t" << model.grid_z.size() << '\n';
    for (std::size_t g = 0; g < model.grid_z.size(); ++g) {
        out << fmt(model.grid_z[g]) << '\t' << fmt(model.grid_lfdr[g]) << '\n';
    }
    atomic_write_file(path, out.str());
}

}  // namespace npae
