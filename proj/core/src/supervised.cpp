#include "npae/supervised.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "npae/errors.hpp"
#include "npae/util.hpp"

namespace npae {

namespace {

void require_labeled_matrix(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels) {
    if (features.empty()) throw InvalidArgument("feature matrix is empty");
    if (features.size() != labels.size()) {
        throw InvalidArgument("feature and label counts differ");
    }
    const std::size_t d = features.front().size();
    if (d == 0) throw InvalidArgument("feature vectors are empty");
    for (const auto& row : features) {
        if (row.size() != d) throw InvalidArgument("feature rows have unequal dimensions");
    }
    for (int label : labels) {
        if (label != 0 && label != 1) throw InvalidArgument("labels must be 0 or 1");
    }
}

// log(1 + exp(-m)) without overflow.
double logistic_loss(double margin) {
    if (margin > 0.0) return std::log1p(std::exp(-margin));
    return -margin + std::log1p(std::exp(margin));
}

double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

struct SmoothEval {
    double loss = 0.0;
    std::vector<double> weight_grad;
    double bias_grad = 0.0;
};

// Mean logistic loss and its gradient at (w, b).
SmoothEval eval_smooth(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                       const std::vector<double>& w, double b, bool want_grad) {
    const std::size_t n = x.size(), d = w.size();
    SmoothEval ev;
    if (want_grad) ev.weight_grad.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double score = b;
        for (std::size_t j = 0; j < d; ++j) score += w[j] * x[i][j];
        const double y = labels[i] == 1 ? 1.0 : -1.0;
        ev.loss += logistic_loss(y * score);
        if (want_grad) {
            // d/ds log(1+exp(-ys)) = -y * sigmoid(-ys)
            const double coef = -y * sigmoid(-y * score);
            for (std::size_t j = 0; j < d; ++j) ev.weight_grad[j] += coef * x[i][j];
            ev.bias_grad += coef;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    ev.loss *= inv_n;
    if (want_grad) {
        for (double& g : ev.weight_grad) g *= inv_n;
        ev.bias_grad *= inv_n;
    }
    return ev;
}

double l1_norm(const std::vector<double>& w) {
    double acc = 0.0;
    for (double v : w) acc += std::abs(v);
    return acc;
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

Standardizer fit_standardizer(const std::vector<std::vector<double>>& features) {
    if (features.empty()) throw InvalidArgument("cannot standardize an empty matrix");
    const std::size_t n = features.size(), d = features.front().size();
    Standardizer st;
    st.mean.assign(d, 0.0);
    st.scale.assign(d, 0.0);
    for (const auto& row : features) {
        if (row.size() != d) throw InvalidArgument("feature rows have unequal dimensions");
        for (std::size_t j = 0; j < d; ++j) st.mean[j] += row[j];
    }
    for (double& m : st.mean) m /= static_cast<double>(n);
    for (const auto& row : features) {
        for (std::size_t j = 0; j < d; ++j) {
            const double delta = row[j] - st.mean[j];
            st.scale[j] += delta * delta;
        }
    }
    for (double& s : st.scale) {
        s = std::sqrt(s / std::max<std::size_t>(n - 1, 1));
        if (s < 1e-12) s = 1.0;  // constant column: leave it centered
    }
    return st;
}

std::vector<std::vector<double>> apply_standardizer(
    const Standardizer& st, const std::vector<std::vector<double>>& features) {
    std::vector<std::vector<double>> out = features;
    for (auto& row : out) {
        if (row.size() != st.mean.size()) {
            throw InvalidArgument("feature dimension does not match standardizer");
        }
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - st.mean[j]) / st.scale[j];
    }
    return out;
}

LinearModel fit_l1_logistic(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, double lambda, double tol,
                            int max_iter) {
    require_labeled_matrix(features, labels);
    if (lambda < 0.0) throw InvalidArgument("lambda must be nonnegative");
    const int positives = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
    const int negatives = static_cast<int>(labels.size()) - positives;
    if (positives < 2 || negatives < 2) {
        throw InvalidArgument("need at least 2 examples of each class");
    }

    const std::size_t d = features.front().size();
    LinearModel model;
    model.lambda = lambda;
    model.weights.assign(d, 0.0);

    double step = 1.0;
    SmoothEval current = eval_smooth(features, labels, model.weights, model.bias, true);
    double objective = current.loss + lambda * l1_norm(model.weights);
    model.objective_history.push_back(objective);

    std::vector<double> next_w(d);
    for (int iter = 0; iter < max_iter; ++iter) {
        double next_b = 0.0;
        double next_smooth = 0.0;
        while (true) {
            for (std::size_t j = 0; j < d; ++j) {
                next_w[j] = soft_threshold(model.weights[j] - step * current.weight_grad[j],
                                           step * lambda);
            }
            next_b = model.bias - step * current.bias_grad;

            // Backtracking on the smooth part: accept when the quadratic
            // model at `step` upper-bounds the true loss.
            double quad = current.loss;
            double dist2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double delta = next_w[j] - model.weights[j];
                quad += current.weight_grad[j] * delta;
                dist2 += delta * delta;
            }
            const double db = next_b - model.bias;
            quad += current.bias_grad * db;
            dist2 += db * db;
            quad += dist2 / (2.0 * step);

            next_smooth = eval_smooth(features, labels, next_w, next_b, false).loss;
            if (next_smooth <= quad + 1e-15 || step < 1e-12) break;
            step *= 0.5;
        }

        const double next_objective = next_smooth + lambda * l1_norm(next_w);
        if (next_objective > objective) break;  // float-level stall: keep the better iterate
        model.weights = next_w;
        model.bias = next_b;
        model.objective_history.push_back(next_objective);
        model.iterations = iter + 1;

        const double decrease = objective - next_objective;
        objective = next_objective;
        if (decrease < tol) break;
        current = eval_smooth(features, labels, model.weights, model.bias, true);
    }
    model.final_objective = objective;
    return model;
}

double predict_probability(const LinearModel& model, const std::vector<double>& x) {
    if (x.size() != model.weights.size()) {
        throw InvalidArgument("feature dimension does not match model");
    }
    double score = model.bias;
    for (std::size_t j = 0; j < x.size(); ++j) score += model.weights[j] * x[j];
    return sigmoid(score);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw InvalidArgument("scores and labels must be nonempty and equal length");
    }
    std::size_t positives = 0;
    for (int label : labels) {
        if (label != 0 && label != 1) throw InvalidArgument("labels must be 0 or 1");
        positives += static_cast<std::size_t>(label);
    }
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw InvalidArgument("auc needs both classes present");
    }

    // Mann-Whitney with midranks for ties.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) positive_rank_sum += midrank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(positives), nn = static_cast<double>(negatives);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

MetricReport evaluate(const LinearModel& model, const std::vector<std::vector<double>>& features,
                      const std::vector<int>& labels) {
    require_labeled_matrix(features, labels);
    MetricReport report;
    std::vector<double> probabilities(features.size());
    int correct = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        probabilities[i] = predict_probability(model, features[i]);
        const int predicted = probabilities[i] > 0.5 ? 1 : 0;
        if (predicted == labels[i]) ++correct;
        if (labels[i] == 1) {
            ++report.positives;
        } else {
            ++report.negatives;
        }
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(features.size());
    report.auc = auc(probabilities, labels);
    return report;
}

LinearModel select_l1_logistic(const std::vector<std::vector<double>>& train_features,
                               const std::vector<int>& train_labels,
                               const std::vector<std::vector<double>>& val_features,
                               const std::vector<int>& val_labels, int grid_size,
                               double lambda_min, double lambda_max) {
    if (grid_size < 1) throw InvalidArgument("lambda grid must have at least one value");
    if (lambda_min <= 0.0 || lambda_min > lambda_max) {
        throw InvalidArgument("lambda grid bounds must satisfy 0 < min <= max");
    }
    LinearModel best;
    double best_auc = -1.0;
    for (int k = 0; k < grid_size; ++k) {
        const double frac = grid_size == 1 ? 0.0 : static_cast<double>(k) / (grid_size - 1);
        const double lambda =
            std::exp(std::log(lambda_min) + frac * (std::log(lambda_max) - std::log(lambda_min)));
        LinearModel model = fit_l1_logistic(train_features, train_labels, lambda);
        std::vector<double> val_scores(val_features.size());
        for (std::size_t i = 0; i < val_features.size(); ++i) {
            val_scores[i] = predict_probability(model, val_features[i]);
        }
        const double val_auc = auc(val_scores, val_labels);
        // >= so ties prefer the larger (sparser) lambda later in the grid.
        if (val_auc >= best_auc) {
            best_auc = val_auc;
            best = std::move(model);
        }
    }
    return best;
}

void save_linear_model(const std::filesystem::path& path, const LinearModel& model) {
    std::ostringstream out;
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    out << "npae-linear-model\t1\n";
    out << "dimension\t" << model.weights.size() << '\n';
    out << "lambda\t" << fmt(model.lambda) << '\n';
    out << "bias\t" << fmt(model.bias) << '\n';
    out << "iterations\t" << model.iterations << '\n';
    out << "objective\t" << fmt(model.final_objective) << '\n';
    std::size_t nonzero = 0;
    for (double w : model.weights) nonzero += w != 0.0 ? 1 : 0;
    out << "nonzero\t" << nonzero << '\n';
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        if (model.weights[j] != 0.0) out << j << '\t' << fmt(model.weights[j]) << '\n';
    }
    atomic_write_file(path, out.str());
}

}  // namespace npae
