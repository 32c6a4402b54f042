#pragma once

#include <vector>

namespace npae {

/// Largest absolute entry: "the most violated residual".
double linf_score(const std::vector<double>& features);

/// Per-dimension location/scale after symmetric trimming, or full
/// covariance with shrinkage for feature kinds without the diagonal
/// (IID) assumption. Variances are floored at 1e-12; a full covariance
/// is symmetric positive-definite after shrinkage.
struct RobustMoments {
    std::vector<double> mean;
    std::vector<double> variance;     // diagonal of the covariance
    std::vector<double> covariance;   // row-major d*d; empty in diagonal mode
    int trim = 0;

    bool full() const { return !covariance.empty(); }
    int dimension() const { return static_cast<int>(mean.size()); }
};

/// Diagonal moments: in each dimension independently, drop the `trim`
/// largest and `trim` smallest values, then take the mean and the
/// unbiased variance of the rest. Requires set size > 2*trim + 1.
RobustMoments robust_moments(const std::vector<std::vector<double>>& set, int trim = 1);

/// Untrimmed mean and full sample covariance, shrunk toward its
/// diagonal: Σ <- (1-α)Σ + α·diag(Σ). Requires at least 2 points.
RobustMoments full_moments(const std::vector<std::vector<double>>& set, double shrinkage = 0.1);

/// sqrt((x-μ)ᵀ Σ⁻¹ (x-μ)) under the moments' covariance model.
double mahalanobis_score(const std::vector<double>& x, const RobustMoments& moments);

/// The set-level map x̂ᵢ = λxᵢ + γ·Σⱼxⱼ with λ = Σ^{-1/2} and
/// γ = -Σ^{-1/2}/N: whitening about the set's arithmetic mean. With
/// moments fitted untrimmed on the same set, ‖x̂ᵢ‖₂ equals the
/// Mahalanobis distance.
std::vector<std::vector<double>> equivariant_transform(const std::vector<std::vector<double>>& set,
                                                       const RobustMoments& moments);

}  // namespace npae
