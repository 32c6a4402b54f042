#include "npae/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "npae/errors.hpp"
#include "npae/util.hpp"

namespace npae {

namespace {

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double(const std::string& text, const std::filesystem::path& path) {
    try {
        std::size_t consumed = 0;
        const double v = std::stod(text, &consumed);
        if (consumed != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw IoError("malformed number '" + text + "' in " + path.string());
    }
}

int parse_int(const std::string& text, const std::filesystem::path& path) {
    try {
        std::size_t consumed = 0;
        const int v = std::stoi(text, &consumed);
        if (consumed != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw IoError("malformed integer '" + text + "' in " + path.string());
    }
}

/// Floyd's algorithm: k distinct indices in [0, n), returned ascending.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(k * 2);
    for (std::size_t j = n - k; j < n; ++j) {
        const std::size_t t = static_cast<std::size_t>(rng.next_below(j + 1));
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::size_t> out(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

void check_pool(const FeaturePool& pool, const char* what) {
    if (pool.ids.empty()) throw InvalidArgument(std::string(what) + " pool is empty");
    if (pool.ids.size() != pool.features.size())
        throw InvalidArgument(std::string(what) + " pool ids and features disagree");
    const std::size_t dim = pool.features.front().size();
    if (dim == 0) throw InvalidArgument(std::string(what) + " pool has empty feature vectors");
    for (const auto& row : pool.features)
        if (row.size() != dim)
            throw InvalidArgument(std::string(what) + " pool has ragged feature vectors");
}

std::vector<std::vector<double>> collect(const std::vector<const std::vector<double>*>& items) {
    std::vector<std::vector<double>> set;
    set.reserve(items.size());
    for (const auto* item : items) set.push_back(*item);
    return set;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Accuracy at the median-score threshold plus rank AUC, for scorers
/// that never see labels.
MetricReport unsupervised_report(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
    MetricReport report;
    report.auc = auc(scores, labels);
    const double threshold = median_of(scores);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] > threshold;
        if (flagged == (labels[i] == 1)) ++correct;
        if (labels[i] == 1)
            ++report.positives;
        else
            ++report.negatives;
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
    return report;
}

void check_labels(const std::vector<Image>& images, const std::vector<int>& labels,
                  const char* what) {
    if (images.size() != labels.size())
        throw InvalidArgument(std::string(what) + " images and labels disagree");
    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw InvalidArgument(std::string(what) + " labels must be 0 or 1");
        pos += static_cast<std::size_t>(y);
    }
    if (pos == 0 || pos == labels.size())
        throw InvalidArgument(std::string(what) + " needs both classes");
}

std::vector<double> matrix_scores(const FeatureMatrix& m,
                                  const std::function<double(const std::vector<double>&)>& f) {
    std::vector<double> scores;
    scores.reserve(m.values.size());
    for (const auto& row : m.values) scores.push_back(f(row));
    return scores;
}

}  // namespace

FeaturePool pool_from_matrix(const FeatureMatrix& matrix) {
    return FeaturePool{matrix.ids, matrix.values};
}

std::vector<double> LinfSetScorer::score_set(const std::vector<const std::vector<double>*>& items,
                                             Rng&) const {
    std::vector<double> scores;
    scores.reserve(items.size());
    for (const auto* item : items) scores.push_back(linf_score(*item));
    return scores;
}

std::vector<double> MahalanobisSetScorer::score_set(
    const std::vector<const std::vector<double>*>& items, Rng&) const {
    const auto set = collect(items);
    const RobustMoments moments =
        full_ ? full_moments(set, shrinkage_) : robust_moments(set, trim_);
    std::vector<double> scores;
    scores.reserve(items.size());
    for (const auto& row : set) scores.push_back(mahalanobis_score(row, moments));
    return scores;
}

std::vector<double> EquivariantLinfSetScorer::score_set(
    const std::vector<const std::vector<double>*>& items, Rng&) const {
    const auto set = collect(items);
    const RobustMoments moments = robust_moments(set, trim_);
    const auto transformed = equivariant_transform(set, moments);
    std::vector<double> scores;
    scores.reserve(items.size());
    for (const auto& row : transformed) scores.push_back(linf_score(row));
    return scores;
}

std::vector<double> LfdrLinfSetScorer::score_set(
    const std::vector<const std::vector<double>*>& items, Rng&) const {
    std::vector<double> scores;
    scores.reserve(items.size());
    for (const auto* item : items) scores.push_back(lfdr_score(model_, linf_score(*item)));
    return scores;
}

std::vector<double> RandomSetScorer::score_set(
    const std::vector<const std::vector<double>*>& items, Rng& rng) const {
    std::vector<double> scores;
    scores.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) scores.push_back(rng.next_double());
    return scores;
}

SetTrialsResult run_set_trials(const SetScorer& scorer, const FeaturePool& holdout,
                               const FeaturePool& probes, ImageKind probe_kind,
                               const std::vector<int>& set_sizes, int trials_per_size,
                               std::uint64_t seed, int threads) {
    check_pool(holdout, "holdout");
    check_pool(probes, "probe");
    if (holdout.features.front().size() != probes.features.front().size())
        throw InvalidArgument("holdout and probe feature dimensions disagree");
    if (set_sizes.empty()) throw InvalidArgument("no set sizes given");
    if (trials_per_size < 1) throw InvalidArgument("trials_per_size must be positive");
    {
        std::unordered_set<std::string> holdout_ids(holdout.ids.begin(), holdout.ids.end());
        if (holdout_ids.size() != holdout.ids.size())
            throw InvalidArgument("holdout pool has duplicate ids");
        for (const auto& id : probes.ids)
            if (holdout_ids.count(id))
                throw InvalidArgument("probe pool overlaps holdout pool: " + id);
    }
    for (int size : set_sizes) {
        if (size < 2) throw InvalidArgument("set size must be at least 2");
        if (static_cast<std::size_t>(size - 1) > holdout.ids.size())
            throw InvalidArgument("holdout pool too small for set size " +
                                  std::to_string(size));
    }

    SetTrialsResult result;
    result.curve.method = scorer.name();
    result.curve.probe_kind = probe_kind;
    result.curve.set_sizes = set_sizes;
    result.curve.trials_per_size = trials_per_size;
    result.records.resize(set_sizes.size() * static_cast<std::size_t>(trials_per_size));

    for (std::size_t si = 0; si < set_sizes.size(); ++si) {
        const int size = set_sizes[si];
        const std::string size_tag = std::to_string(size);
        TrialRecord* slice = result.records.data() + si * static_cast<std::size_t>(trials_per_size);

        parallel_for(trials_per_size, threads, [&](std::int64_t t) {
            const auto trial = static_cast<std::uint64_t>(t);
            Rng distractor_rng(derive_seed(seed, "distractors-" + size_tag, trial));
            Rng probe_rng(derive_seed(seed, "probe-" + size_tag, trial));
            Rng score_rng(derive_seed(seed, "score-" + size_tag, trial));

            const auto picks = sample_without_replacement(
                holdout.ids.size(), static_cast<std::size_t>(size - 1), distractor_rng);
            const auto probe =
                static_cast<std::size_t>(probe_rng.next_below(probes.ids.size()));

            std::vector<const std::vector<double>*> items;
            items.reserve(static_cast<std::size_t>(size));
            items.push_back(&probes.features[probe]);
            for (std::size_t pick : picks) items.push_back(&holdout.features[pick]);

            const auto scores = scorer.score_set(items, score_rng);
            if (scores.size() != items.size())
                throw Error("scorer returned " + std::to_string(scores.size()) +
                            " scores for a set of " + std::to_string(items.size()));
            for (double s : scores)
                if (!std::isfinite(s)) throw Error("scorer returned a non-finite score");

            const double probe_score = scores[0];
            const std::string& probe_id = probes.ids[probe];
            int rank = 1;
            for (std::size_t k = 1; k < scores.size(); ++k) {
                const std::string& id = holdout.ids[picks[k - 1]];
                if (scores[k] > probe_score || (scores[k] == probe_score && id < probe_id))
                    ++rank;
            }

            TrialRecord rec;
            rec.trial_index = static_cast<int>(t);
            rec.set_size = size;
            rec.probe_id = probe_id;
            rec.probe_kind = probe_kind;
            rec.distractor_ids.reserve(picks.size());
            for (std::size_t pick : picks) rec.distractor_ids.push_back(holdout.ids[pick]);
            rec.probe_rank = rank;
            slice[t] = std::move(rec);
        });

        std::size_t at1 = 0, at5 = 0, at10 = 0;
        for (int t = 0; t < trials_per_size; ++t) {
            const int rank = slice[t].probe_rank;
            at1 += rank <= 1;
            at5 += rank <= 5;
            at10 += rank <= 10;
        }
        const auto denom = static_cast<double>(trials_per_size);
        result.curve.recall_at_1.push_back(static_cast<double>(at1) / denom);
        result.curve.recall_at_5.push_back(static_cast<double>(at5) / denom);
        result.curve.recall_at_10.push_back(static_cast<double>(at10) / denom);
    }
    return result;
}

SetTrialsResult run_control(const SetScorer& scorer, const FeaturePool& holdout,
                            const FeaturePool& control_probes, const std::vector<int>& set_sizes,
                            int trials_per_size, std::uint64_t seed, int threads) {
    return run_set_trials(scorer, holdout, control_probes, ImageKind::ControlTypical, set_sizes,
                          trials_per_size, seed, threads);
}

std::vector<AttributeCell> run_attribute_experiment(const AttributeCorpus& corpus,
                                                    const AttributeExperimentConfig& config) {
    if (corpus.ae_train.empty()) throw InvalidArgument("autoencoder training corpus is empty");
    check_labels(corpus.sup_train, corpus.sup_train_labels, "supervised train");
    check_labels(corpus.sup_val, corpus.sup_val_labels, "supervised validation");
    check_labels(corpus.test, corpus.test_labels, "test");

    const Checkpoint checkpoint = train(corpus.ae_train, config.arch, config.train);
    const Autoencoder model = Autoencoder::from_checkpoint(checkpoint);
    const BoxGrid grid =
        grid_boxes(config.arch.height, config.arch.width, config.box_height, config.box_width,
                   config.grid_stride, config.edge_exclusion);

    std::vector<AttributeCell> cells;
    for (FeatureKind kind :
         {FeatureKind::InpaintResidual, FeatureKind::RawResidual, FeatureKind::Code}) {
        const FeatureMatrix train_m =
            extract_features(model, kind, corpus.sup_train, grid, config.threads);
        const FeatureMatrix val_m =
            extract_features(model, kind, corpus.sup_val, grid, config.threads);
        const FeatureMatrix test_m =
            extract_features(model, kind, corpus.test, grid, config.threads);

        {
            const Standardizer st = fit_standardizer(train_m.values);
            const LinearModel selected = select_l1_logistic(
                apply_standardizer(st, train_m.values), corpus.sup_train_labels,
                apply_standardizer(st, val_m.values), corpus.sup_val_labels, config.lambda_grid);
            cells.push_back({"l1-logistic", kind,
                             evaluate(selected, apply_standardizer(st, test_m.values),
                                      corpus.test_labels)});
        }
        {
            std::vector<std::vector<double>> negatives;
            for (std::size_t i = 0; i < train_m.values.size(); ++i)
                if (corpus.sup_train_labels[i] == 0) negatives.push_back(train_m.values[i]);
            const RobustMoments moments = kind == FeatureKind::Code
                                              ? full_moments(negatives, config.shrinkage)
                                              : robust_moments(negatives, config.trim);
            const auto scores = matrix_scores(test_m, [&](const std::vector<double>& row) {
                return mahalanobis_score(row, moments);
            });
            cells.push_back({"mahalanobis", kind, unsupervised_report(scores, corpus.test_labels)});
        }
        {
            const auto scores = matrix_scores(test_m, linf_score);
            cells.push_back({"linf", kind, unsupervised_report(scores, corpus.test_labels)});
        }
    }
    return cells;
}

DecileReport decile_report(const std::vector<std::string>& ids, const std::vector<double>& scores,
                           const std::vector<TrialRecord>& records) {
    if (ids.size() != scores.size()) throw InvalidArgument("ids and scores disagree");
    if (ids.size() < 10) throw InvalidArgument("decile report needs at least 10 images");

    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return ids[a] < ids[b];
    });

    DecileReport report;
    const std::size_t n = order.size();
    for (std::size_t d = 0; d < 10; ++d) {
        const std::size_t lo = d * n / 10;
        const std::size_t hi = (d + 1) * n / 10;
        const std::size_t mid = lo + (hi - lo - 1) / 2;
        report.decile_ids.push_back(ids[order[mid]]);
        report.decile_scores.push_back(scores[order[mid]]);
    }

    std::map<std::string, std::map<int, std::array<int, 4>>> tallies;  // hits@1/5/10, trials
    std::unordered_set<int> sizes_seen;
    for (const auto& rec : records) {
        auto& cell = tallies[rec.probe_id][rec.set_size];
        cell[0] += rec.probe_rank <= 1;
        cell[1] += rec.probe_rank <= 5;
        cell[2] += rec.probe_rank <= 10;
        cell[3] += 1;
        sizes_seen.insert(rec.set_size);
    }
    report.freq_sizes.assign(sizes_seen.begin(), sizes_seen.end());
    std::sort(report.freq_sizes.begin(), report.freq_sizes.end());
    for (const auto& [probe_id, by_size] : tallies) {
        report.freq_ids.push_back(probe_id);
        std::vector<double> f1, f5, f10;
        for (int size : report.freq_sizes) {
            const auto it = by_size.find(size);
            if (it == by_size.end() || it->second[3] == 0) {
                f1.push_back(0.0);
                f5.push_back(0.0);
                f10.push_back(0.0);
                continue;
            }
            const double trials = it->second[3];
            f1.push_back(it->second[0] / trials);
            f5.push_back(it->second[1] / trials);
            f10.push_back(it->second[2] / trials);
        }
        report.freq_at_1.push_back(std::move(f1));
        report.freq_at_5.push_back(std::move(f5));
        report.freq_at_10.push_back(std::move(f10));
    }
    return report;
}

void save_recall_curves(const std::filesystem::path& path,
                        const std::vector<RecallCurve>& curves) {
    std::ostringstream out;
    out << "npae-recall\t1\n";
    out << "method\tprobe_kind\tset_size\ttrials\trecall_at_1\trecall_at_5\trecall_at_10\n";
    for (const auto& curve : curves) {
        for (std::size_t i = 0; i < curve.set_sizes.size(); ++i) {
            out << curve.method << '\t' << to_string(curve.probe_kind) << '\t'
                << curve.set_sizes[i] << '\t' << curve.trials_per_size << '\t'
                << format_value(curve.recall_at_1[i]) << '\t' << format_value(curve.recall_at_5[i])
                << '\t' << format_value(curve.recall_at_10[i]) << '\n';
        }
    }
    atomic_write_file(path, out.str());
}

std::vector<RecallCurve> load_recall_curves(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "npae-recall\t1")
        throw IoError("not a recall curve file: " + path.string());
    std::getline(in, line);  // column header

    std::vector<RecallCurve> curves;
    std::unordered_map<std::string, std::size_t> index;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_fields(line, '\t');
        if (fields.size() != 7) throw IoError("malformed recall row in " + path.string());
        const std::string key = fields[0] + "\t" + fields[1];
        auto [it, inserted] = index.try_emplace(key, curves.size());
        if (inserted) {
            curves.emplace_back();
            curves.back().method = fields[0];
            curves.back().probe_kind = kind_from_string(fields[1]);
        }
        RecallCurve& curve = curves[it->second];
        curve.set_sizes.push_back(parse_int(fields[2], path));
        curve.trials_per_size = parse_int(fields[3], path);
        curve.recall_at_1.push_back(parse_double(fields[4], path));
        curve.recall_at_5.push_back(parse_double(fields[5], path));
        curve.recall_at_10.push_back(parse_double(fields[6], path));
    }
    return curves;
}

void save_trial_records(const std::filesystem::path& path,
                        const std::vector<TrialRecord>& records) {
    std::ostringstream out;
    out << "npae-trials\t1\n";
    out << "trial\tset_size\tprobe_kind\tprobe_id\tprobe_rank\tdistractors\n";
    for (const auto& rec : records) {
        out << rec.trial_index << '\t' << rec.set_size << '\t' << to_string(rec.probe_kind) << '\t'
            << rec.probe_id << '\t' << rec.probe_rank << '\t';
        for (std::size_t i = 0; i < rec.distractor_ids.size(); ++i) {
            if (i) out << ',';
            out << rec.distractor_ids[i];
        }
        out << '\n';
    }
    atomic_write_file(path, out.str());
}

std::vector<TrialRecord> load_trial_records(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "npae-trials\t1")
        throw IoError("not a trial record file: " + path.string());
    std::getline(in, line);

    std::vector<TrialRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_fields(line, '\t');
        if (fields.size() != 6) throw IoError("malformed trial row in " + path.string());
        TrialRecord rec;
        rec.trial_index = parse_int(fields[0], path);
        rec.set_size = parse_int(fields[1], path);
        rec.probe_kind = kind_from_string(fields[2]);
        rec.probe_id = fields[3];
        rec.probe_rank = parse_int(fields[4], path);
        if (!fields[5].empty()) rec.distractor_ids = split_fields(fields[5], ',');
        records.push_back(std::move(rec));
    }
    return records;
}

void save_attribute_table(const std::filesystem::path& path,
                          const std::vector<AttributeCell>& cells) {
    std::ostringstream out;
    out << "npae-attr\t1\n";
    out << "method\tfeatures\taccuracy\tauc\tpositives\tnegatives\n";
    for (const auto& cell : cells) {
        out << cell.method << '\t' << to_string(cell.kind) << '\t'
            << format_value(cell.report.accuracy) << '\t' << format_value(cell.report.auc) << '\t'
            << cell.report.positives << '\t' << cell.report.negatives << '\n';
    }
    atomic_write_file(path, out.str());
}

void save_score_table(const std::filesystem::path& path, const ScoreTable& table) {
    if (table.ids.size() != table.scores.size())
        throw InvalidArgument("score table ids and scores disagree");
    std::ostringstream out;
    out << "npae-scores\t1\t" << table.method << '\n';
    for (std::size_t i = 0; i < table.ids.size(); ++i)
        out << table.ids[i] << '\t' << format_value(table.scores[i]) << '\n';
    atomic_write_file(path, out.str());
}

ScoreTable load_score_table(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty score file: " + path.string());
    const auto header = split_fields(line, '\t');
    if (header.size() != 3 || header[0] != "npae-scores" || header[1] != "1")
        throw IoError("not a score file: " + path.string());

    ScoreTable table;
    table.method = header[2];
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_fields(line, '\t');
        if (fields.size() != 2) throw IoError("malformed score row in " + path.string());
        table.ids.push_back(fields[0]);
        table.scores.push_back(parse_double(fields[1], path));
    }
    return table;
}

void save_decile_report(const std::filesystem::path& path, const DecileReport& report,
                        const std::map<std::string, std::string>& id_to_path) {
    std::ostringstream out;
    out << "npae-deciles\t1\n";
    for (std::size_t d = 0; d < report.decile_ids.size(); ++d) {
        const auto it = id_to_path.find(report.decile_ids[d]);
        out << "decile\t" << d << '\t' << report.decile_ids[d] << '\t'
            << format_value(report.decile_scores[d]) << '\t'
            << (it == id_to_path.end() ? std::string("-") : it->second) << '\n';
    }
    for (std::size_t i = 0; i < report.freq_ids.size(); ++i) {
        for (std::size_t s = 0; s < report.freq_sizes.size(); ++s) {
            out << "freq\t" << report.freq_ids[i] << '\t' << report.freq_sizes[s] << '\t'
                << format_value(report.freq_at_1[i][s]) << '\t'
                << format_value(report.freq_at_5[i][s]) << '\t'
                << format_value(report.freq_at_10[i][s]) << '\n';
        }
    }
    atomic_write_file(path, out.str());
}

}  // namespace npae
