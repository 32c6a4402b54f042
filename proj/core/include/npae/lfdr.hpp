#pragma once

#include <filesystem>
#include <vector>

namespace npae {

/// Empirical-null local false discovery rate model for a pool of
/// anomaly scores. Scores (optionally log-transformed) are standardized
/// by central matching (median, IQR/1.349); the null f0 is the standard
/// normal; the marginal f is a Gaussian kernel density estimate
/// evaluated on a fixed grid; π0 = min(1, f(mode)/f0(mode)).
///
/// lfdr(z) = min(1, π0 f0(z) / f(z)), forced monotone non-increasing
/// moving outward from the fitted mode so tail queries beyond the data
/// support stay anomalous. Queries are clamped to the grid.
struct LfdrModel {
    bool use_log = false;
    double location = 0.0;
    double scale = 1.0;
    double bandwidth = 0.0;
    double pi0 = 1.0;
    double mode_z = 0.0;
    std::vector<double> grid_z;     // ascending, covers the data ±3 bandwidths
    std::vector<double> grid_f;     // marginal density estimate on the grid
    std::vector<double> grid_lfdr;  // monotone-enveloped lfdr on the grid
};

/// Fit on at least 200 scores; with use_log, all scores must be > 0.
LfdrModel fit_lfdr(const std::vector<double>& scores, bool use_log);

/// lfdr at a raw score, in [0, 1].
double lfdr_value(const LfdrModel& model, double score);

/// 1 - lfdr, so that larger = more anomalous.
double lfdr_score(const LfdrModel& model, double score);

/// Structured-text export: fit parameters plus the z / lfdr grid.
void save_lfdr_model(const std::filesystem::path& path, const LfdrModel& model);

}  // namespace npae
