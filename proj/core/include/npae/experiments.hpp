#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "npae/autoencoder.hpp"
#include "npae/features.hpp"
#include "npae/lfdr.hpp"
#include "npae/manifest.hpp"
#include "npae/rng.hpp"
#include "npae/scoring.hpp"
#include "npae/supervised.hpp"

namespace npae {

/// One evaluation set's composition and outcome. Rank 1 means the
/// probe scored most anomalous in its set.
struct TrialRecord {
    int trial_index = 0;
    int set_size = 0;
    std::string probe_id;
    ImageKind probe_kind = ImageKind::Anomaly;
    std::vector<std::string> distractor_ids;
    int probe_rank = 0;
};

struct RecallCurve {
    std::string method;
    ImageKind probe_kind = ImageKind::Anomaly;
    std::vector<int> set_sizes;
    std::vector<double> recall_at_1;
    std::vector<double> recall_at_5;
    std::vector<double> recall_at_10;
    int trials_per_size = 0;
};

/// Parallel arrays of image ids and their feature vectors.
struct FeaturePool {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> features;
};

FeaturePool pool_from_matrix(const FeatureMatrix& matrix);

/// Scores one evaluation set jointly (set-level statistics see the
/// whole set). Implementations are pure up to the supplied per-trial
/// RNG stream, so trials can run on any number of threads.
class SetScorer {
public:
    virtual ~SetScorer() = default;
    virtual std::string name() const = 0;
    virtual std::vector<double> score_set(const std::vector<const std::vector<double>*>& items,
                                          Rng& rng) const = 0;
};

/// Per-item L∞ norm of the feature vector.
class LinfSetScorer : public SetScorer {
public:
    std::string name() const override { return "linf"; }
    std::vector<double> score_set(const std::vector<const std::vector<double>*>& items,
                                  Rng& rng) const override;
};

/// Robust moments fitted on the set itself, then per-item distance.
class MahalanobisSetScorer : public SetScorer {
public:
    explicit MahalanobisSetScorer(int trim = 1, bool full_covariance = false,
                                  double shrinkage = 0.1)
        : trim_(trim), full_(full_covariance), shrinkage_(shrinkage) {}
    std::string name() const override { return "mahalanobis"; }
    std::vector<double> score_set(const std::vector<const std::vector<double>*>& items,
                                  Rng& rng) const override;

private:
    int trim_;
    bool full_;
    double shrinkage_;
};

/// Equivariant whitening of the set followed by the per-item L∞ norm.
class EquivariantLinfSetScorer : public SetScorer {
public:
    explicit EquivariantLinfSetScorer(int trim = 1) : trim_(trim) {}
    std::string name() const override { return "equivariant-linf"; }
    std::vector<double> score_set(const std::vector<const std::vector<double>*>& items,
                                  Rng& rng) const override;

private:
    int trim_;
};

/// 1 - lfdr of the per-item L∞ score under a model fitted on a pooled
/// holdout population.
class LfdrLinfSetScorer : public SetScorer {
public:
    explicit LfdrLinfSetScorer(LfdrModel model) : model_(std::move(model)) {}
    std::string name() const override { return "lfdr-linf"; }
    std::vector<double> score_set(const std::vector<const std::vector<double>*>& items,
                                  Rng& rng) const override;

private:
    LfdrModel model_;
};

/// Uniform random scores, for chance calibration.
class RandomSetScorer : public SetScorer {
public:
    std::string name() const override { return "random"; }
    std::vector<double> score_set(const std::vector<const std::vector<double>*>& items,
                                  Rng& rng) const override;
};

struct SetTrialsResult {
    RecallCurve curve;
    std::vector<TrialRecord> records;  // sizes in order, trials_per_size each
};

/// The §6 protocol: per trial, sample one probe and (size-1) holdout
/// distractors, rank by score descending with ties broken by ascending
/// id, and aggregate recall@1/5/10. The distractor stream depends only
/// on (seed, size, trial), never on the probe pool, so an anomaly run
/// and a control run with the same seed see identical distractor sets.
SetTrialsResult run_set_trials(const SetScorer& scorer, const FeaturePool& holdout,
                               const FeaturePool& probes, ImageKind probe_kind,
                               const std::vector<int>& set_sizes, int trials_per_size,
                               std::uint64_t seed, int threads = 1);

/// run_set_trials with control-typical probes: the paired null
/// experiment.
SetTrialsResult run_control(const SetScorer& scorer, const FeaturePool& holdout,
                            const FeaturePool& control_probes, const std::vector<int>& set_sizes,
                            int trials_per_size, std::uint64_t seed, int threads = 1);

/// The §5 proxy-attribute experiment on a labeled corpus.
struct AttributeCorpus {
    std::vector<Image> ae_train;  // attribute-negative typicals
    std::vector<Image> sup_train;
    std::vector<int> sup_train_labels;
    std::vector<Image> sup_val;
    std::vector<int> sup_val_labels;
    std::vector<Image> test;
    std::vector<int> test_labels;
};

struct AttributeExperimentConfig {
    ArchConfig arch;
    TrainHyper train;
    int box_height = 16;
    int box_width = 16;
    int grid_stride = 16;
    int edge_exclusion = 16;
    int lambda_grid = 20;
    int trim = 1;
    double shrinkage = 0.1;
    int threads = 1;
};

struct AttributeCell {
    std::string method;  // "l1-logistic" | "mahalanobis" | "linf"
    FeatureKind kind = FeatureKind::InpaintResidual;
    MetricReport report;
};

/// Trains the autoencoder on the attribute-negative corpus, extracts
/// all three feature kinds, and emits the metric table for
/// {l1-logistic, mahalanobis, linf} x {inpaint, raw, code}. For the
/// unsupervised rows, accuracy is taken at the median-score threshold;
/// AUC is threshold-free.
std::vector<AttributeCell> run_attribute_experiment(const AttributeCorpus& corpus,
                                                    const AttributeExperimentConfig& config);

/// Figure-3-style report: median image of each score decile plus
/// per-image identification frequencies from trial records.
struct DecileReport {
    std::vector<std::string> decile_ids;  // 10 ids, ascending score deciles
    std::vector<double> decile_scores;
    std::vector<std::string> freq_ids;  // probe ids appearing in the records
    std::vector<int> freq_sizes;
    std::vector<std::vector<double>> freq_at_1;  // [id][size]
    std::vector<std::vector<double>> freq_at_5;
    std::vector<std::vector<double>> freq_at_10;
};

DecileReport decile_report(const std::vector<std::string>& ids, const std::vector<double>& scores,
                           const std::vector<TrialRecord>& records);

/// Tabular result files (tab-separated, header line, 9 significant
/// digits), deterministic given identical inputs.
void save_recall_curves(const std::filesystem::path& path,
                        const std::vector<RecallCurve>& curves);
std::vector<RecallCurve> load_recall_curves(const std::filesystem::path& path);

void save_trial_records(const std::filesystem::path& path,
                        const std::vector<TrialRecord>& records);
std::vector<TrialRecord> load_trial_records(const std::filesystem::path& path);

void save_attribute_table(const std::filesystem::path& path,
                          const std::vector<AttributeCell>& cells);

struct ScoreTable {
    std::string method;
    std::vector<std::string> ids;
    std::vector<double> scores;
};

void save_score_table(const std::filesystem::path& path, const ScoreTable& table);
ScoreTable load_score_table(const std::filesystem::path& path);

void save_decile_report(const std::filesystem::path& path, const DecileReport& report,
                        const std::map<std::string, std::string>& id_to_path);

}  // namespace npae
