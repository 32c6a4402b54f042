#pragma once

#include <filesystem>
#include <vector>

namespace npae {

/// L1-regularized logistic classifier fit by proximal gradient (ISTA
/// with backtracking), so the recorded objective is non-increasing.
struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    double lambda = 0.0;
    int iterations = 0;
    double final_objective = 0.0;
    std::vector<double> objective_history;
};

struct MetricReport {
    double accuracy = 0.0;
    double auc = 0.0;
    int positives = 0;
    int negatives = 0;
};

/// Per-column affine map to zero mean / unit scale (train-split
/// moments; scale floored to avoid division by zero).
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;
};

Standardizer fit_standardizer(const std::vector<std::vector<double>>& features);
std::vector<std::vector<double>> apply_standardizer(const Standardizer& st,
                                                    const std::vector<std::vector<double>>& features);

/// Minimize mean logistic loss + λ‖w‖₁ (bias unregularized). Labels are
/// 0/1 and both classes must appear at least twice.
LinearModel fit_l1_logistic(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, double lambda, double tol = 1e-7,
                            int max_iter = 2000);

double predict_probability(const LinearModel& model, const std::vector<double>& x);

/// Accuracy at probability threshold 0.5 plus rank-based AUC.
MetricReport evaluate(const LinearModel& model, const std::vector<std::vector<double>>& features,
                      const std::vector<int>& labels);

/// Probability a random positive outscores a random negative, ties
/// counted half (Mann-Whitney).
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Fit one model per λ on a logarithmic grid, pick the best validation
/// AUC (ties go to the sparser, larger-λ model).
LinearModel select_l1_logistic(const std::vector<std::vector<double>>& train_features,
                               const std::vector<int>& train_labels,
                               const std::vector<std::vector<double>>& val_features,
                               const std::vector<int>& val_labels, int grid_size = 20,
                               double lambda_min = 1e-4, double lambda_max = 1.0);

/// Structured-text export: dimension, bias, sparse weight list.
void save_linear_model(const std::filesystem::path& path, const LinearModel& model);

}  // namespace npae
