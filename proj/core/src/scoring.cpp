#include "npae/scoring.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "npae/errors.hpp"

namespace npae {

namespace {

constexpr double kVarianceFloor = 1e-12;

void require_rectangular(const std::vector<std::vector<double>>& set) {
    if (set.empty()) throw InvalidArgument("feature set is empty");
    const std::size_t d = set.front().size();
    if (d == 0) throw InvalidArgument("feature vectors are empty");
    for (const auto& row : set) {
        if (row.size() != d) throw InvalidArgument("feature set rows have unequal dimensions");
    }
}

void require_dimension(const std::vector<double>& x, const RobustMoments& moments) {
    if (static_cast<int>(x.size()) != moments.dimension()) {
        throw InvalidArgument("feature dimension " + std::to_string(x.size()) +
                              " does not match moments dimension " +
                              std::to_string(moments.dimension()));
    }
}

Eigen::MatrixXd covariance_matrix(const RobustMoments& moments) {
    const int d = moments.dimension();
    Eigen::MatrixXd sigma(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            sigma(i, j) = moments.covariance[static_cast<std::size_t>(i) * d + j];
    return sigma;
}

}  // namespace

double linf_score(const std::vector<double>& features) {
    if (features.empty()) throw InvalidArgument("linf_score: empty feature vector");
    double best = 0.0;
    for (double v : features) best = std::max(best, std::abs(v));
    return best;
}

RobustMoments robust_moments(const std::vector<std::vector<double>>& set, int trim) {
    require_rectangular(set);
    if (trim < 0) throw InvalidArgument("trim count must be nonnegative");
    const int n = static_cast<int>(set.size());
    if (n <= 2 * trim + 1) {
        throw InvalidArgument("set of " + std::to_string(n) +
                              " is too small for trim " + std::to_string(trim));
    }
    const int d = static_cast<int>(set.front().size());

    RobustMoments moments;
    moments.trim = trim;
    moments.mean.resize(static_cast<std::size_t>(d));
    moments.variance.resize(static_cast<std::size_t>(d));

    std::vector<double> column(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = set[i][j];
        std::sort(column.begin(), column.end());
        const int lo = trim, hi = n - trim;
        const int m = hi - lo;
        double mean = 0.0;
        for (int i = lo; i < hi; ++i) mean += column[static_cast<std::size_t>(i)];
        mean /= m;
        double var = 0.0;
        for (int i = lo; i < hi; ++i) {
            const double dlt = column[static_cast<std::size_t>(i)] - mean;
            var += dlt * dlt;
        }
        var /= (m - 1);
        moments.mean[static_cast<std::size_t>(j)] = mean;
        moments.variance[static_cast<std::size_t>(j)] = std::max(var, kVarianceFloor);
    }
    return moments;
}

RobustMoments full_moments(const std::vector<std::vector<double>>& set, double shrinkage) {
    require_rectangular(set);
    if (shrinkage < 0.0 || shrinkage > 1.0) throw InvalidArgument("shrinkage must be in [0,1]");
    const int n = static_cast<int>(set.size());
    if (n < 2) throw InvalidArgument("full covariance needs at least 2 points");
    const int d = static_cast<int>(set.front().size());

    RobustMoments moments;
    moments.trim = 0;
    moments.mean.assign(static_cast<std::size_t>(d), 0.0);
    for (const auto& row : set)
        for (int j = 0; j < d; ++j) moments.mean[static_cast<std::size_t>(j)] += row[j];
    for (double& m : moments.mean) m /= n;

    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd delta(d);
    for (const auto& row : set) {
        for (int j = 0; j < d; ++j) delta(j) = row[j] - moments.mean[static_cast<std::size_t>(j)];
        sigma.noalias() += delta * delta.transpose();
    }
    sigma /= (n - 1);
    for (int j = 0; j < d; ++j) sigma(j, j) = std::max(sigma(j, j), kVarianceFloor);

    const Eigen::MatrixXd diag = sigma.diagonal().asDiagonal();
    sigma = (1.0 - shrinkage) * sigma + shrinkage * diag;

    moments.covariance.resize(static_cast<std::size_t>(d) * d);
    moments.variance.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        moments.variance[static_cast<std::size_t>(i)] = sigma(i, i);
        for (int j = 0; j < d; ++j) {
            moments.covariance[static_cast<std::size_t>(i) * d + j] = sigma(i, j);
        }
    }
    return moments;
}

double mahalanobis_score(const std::vector<double>& x, const RobustMoments& moments) {
    require_dimension(x, moments);
    const int d = moments.dimension();
    if (!moments.full()) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) {
            const double delta = x[static_cast<std::size_t>(j)] -
                                 moments.mean[static_cast<std::size_t>(j)];
            acc += delta * delta / moments.variance[static_cast<std::size_t>(j)];
        }
        return std::sqrt(acc);
    }
    Eigen::VectorXd delta(d);
    for (int j = 0; j < d; ++j) {
        delta(j) = x[static_cast<std::size_t>(j)] - moments.mean[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd sigma = covariance_matrix(moments);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw Error("covariance is not positive definite despite shrinkage");
    }
    const Eigen::VectorXd solved = llt.solve(delta);
    return std::sqrt(delta.dot(solved));
}

std::vector<std::vector<double>> equivariant_transform(const std::vector<std::vector<double>>& set,
                                                       const RobustMoments& moments) {
    require_rectangular(set);
    const int d = moments.dimension();
    if (static_cast<int>(set.front().size()) != d) {
        throw InvalidArgument("set dimension does not match moments dimension");
    }
    const int n = static_cast<int>(set.size());

    std::vector<double> column_sum(static_cast<std::size_t>(d), 0.0);
    for (const auto& row : set)
        for (int j = 0; j < d; ++j) column_sum[static_cast<std::size_t>(j)] += row[j];

    std::vector<std::vector<double>> out(set.size(),
                                         std::vector<double>(static_cast<std::size_t>(d)));
    if (!moments.full()) {
        // λ = diag(σ^-1), γ = -λ/N applied per dimension.
        for (int j = 0; j < d; ++j) {
            const double lambda = 1.0 / std::sqrt(moments.variance[static_cast<std::size_t>(j)]);
            const double gamma = -lambda / n;
            for (int i = 0; i < n; ++i) {
                out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    lambda * set[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                    gamma * column_sum[static_cast<std::size_t>(j)];
            }
        }
        return out;
    }

    // λ = Σ^{-1/2} via the symmetric eigendecomposition.
    const Eigen::MatrixXd sigma = covariance_matrix(moments);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    if (es.info() != Eigen::Success) {
        throw Error("covariance eigendecomposition failed");
    }
    Eigen::VectorXd inv_sqrt = es.eigenvalues();
    for (int j = 0; j < d; ++j) {
        if (inv_sqrt(j) <= 0.0) throw Error("covariance is not positive definite");
        inv_sqrt(j) = 1.0 / std::sqrt(inv_sqrt(j));
    }
    const Eigen::MatrixXd lambda =
        es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();

    Eigen::VectorXd sum(d);
    for (int j = 0; j < d; ++j) sum(j) = column_sum[static_cast<std::size_t>(j)];
    const Eigen::VectorXd shift = lambda * sum / n;

    Eigen::VectorXd xi(d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) xi(j) = set[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        const Eigen::VectorXd mapped = lambda * xi - shift;
        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = mapped(j);
    }
    return out;
}

}  // namespace npae
