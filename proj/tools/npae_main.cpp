#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "npae/autoencoder.hpp"
#include "npae/checkpoint.hpp"
#include "npae/datasynth.hpp"
#include "npae/errors.hpp"
#include "npae/experiments.hpp"
#include "npae/features.hpp"
#include "npae/image_io.hpp"
#include "npae/lfdr.hpp"
#include "npae/manifest.hpp"
#include "npae/masking.hpp"
#include "npae/rng.hpp"
#include "npae/scoring.hpp"
#include "npae/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace npae;

namespace {

constexpr const char* kVersion = "1.0.0";

struct RunConfig {
    fs::path out;
    std::uint64_t seed = 7;
    int threads = 1;

    ArchConfig arch;

    int box_height = 16;
    int box_width = 16;
    int stride = 16;
    int edge_exclusion = 16;

    TrainHyper train;

    FeatureKind feature_kind = FeatureKind::InpaintResidual;
    std::vector<std::string> methods = {"linf", "mahalanobis", "equivariant-linf", "lfdr-linf",
                                        "random"};
    int trim = 1;
    double shrinkage = 0.1;

    std::vector<int> set_sizes = {16, 64, 128, 256};
    int trials_per_size = 2000;

    int data_train = 2000;
    int data_holdout = 600;
    int data_anomalies = 100;
    int data_control = 100;

    int attr_ae_train = 1200;
    int attr_train_per_class = 300;
    int attr_val_per_class = 150;
    int attr_test_per_class = 400;
    int lambda_grid = 20;

    json raw = json::object();  // canonical form, hashed into provenance
};

[[noreturn]] void bad_config(const std::string& message) { throw ConfigError(message); }

void check_keys(const json& obj, const std::string& prefix,
                const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key))
            bad_config("unknown config key '" + (prefix.empty() ? key : prefix + "." + key) + "'");
        (void)value;
    }
}

int get_int(const json& obj, const char* key, int fallback, int lo, int hi,
            const std::string& prefix) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        bad_config("config key '" + prefix + key + "' must be an integer");
    const auto value = v.get<std::int64_t>();
    if (value < lo || value > hi)
        bad_config("config key '" + prefix + key + "' out of range");
    return static_cast<int>(value);
}

double get_double(const json& obj, const char* key, double fallback, const std::string& prefix) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) bad_config("config key '" + prefix + key + "' must be a number");
    return v.get<double>();
}

std::vector<int> get_int_list(const json& obj, const char* key, std::vector<int> fallback,
                              const std::string& prefix) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_array()) bad_config("config key '" + prefix + key + "' must be a list");
    std::vector<int> out;
    for (const auto& item : v) {
        if (!item.is_number_integer())
            bad_config("config key '" + prefix + key + "' must hold integers");
        out.push_back(item.get<int>());
    }
    return out;
}

RunConfig parse_config(const json& root) {
    RunConfig cfg;
    cfg.raw = root;
    check_keys(root, "",
               {"out", "seed", "threads", "image", "arch", "grid", "train", "features", "score",
                "experiment", "data", "attribute"});

    if (root.contains("out")) {
        if (!root.at("out").is_string()) bad_config("config key 'out' must be a string");
        cfg.out = root.at("out").get<std::string>();
    }
    if (root.contains("seed")) {
        if (!root.at("seed").is_number_integer() || root.at("seed").get<std::int64_t>() < 0)
            bad_config("config key 'seed' must be a non-negative integer");
        cfg.seed = root.at("seed").get<std::uint64_t>();
    }
    cfg.threads = get_int(root, "threads", 1, 1, 256, "");

    if (root.contains("image")) {
        const json& image = root.at("image");
        check_keys(image, "image", {"height", "width", "channels"});
        cfg.arch.height = get_int(image, "height", cfg.arch.height, 16, 4096, "image.");
        cfg.arch.width = get_int(image, "width", cfg.arch.width, 16, 4096, "image.");
        cfg.arch.channels = get_int(image, "channels", cfg.arch.channels, 1, 3, "image.");
    }
    if (root.contains("arch")) {
        const json& arch = root.at("arch");
        check_keys(arch, "arch",
                   {"encoder_channels", "code_dim", "decoder_start_channels", "decoder_channels",
                    "kernel"});
        cfg.arch.encoder_channels =
            get_int_list(arch, "encoder_channels", cfg.arch.encoder_channels, "arch.");
        cfg.arch.code_dim = get_int(arch, "code_dim", cfg.arch.code_dim, 1, 65536, "arch.");
        cfg.arch.decoder_start_channels = get_int(arch, "decoder_start_channels",
                                                  cfg.arch.decoder_start_channels, 1, 4096,
                                                  "arch.");
        cfg.arch.decoder_channels =
            get_int_list(arch, "decoder_channels", cfg.arch.decoder_channels, "arch.");
        cfg.arch.kernel = get_int(arch, "kernel", cfg.arch.kernel, 1, 15, "arch.");
    }
    if (root.contains("grid")) {
        const json& grid = root.at("grid");
        check_keys(grid, "grid", {"box_height", "box_width", "stride", "edge_exclusion"});
        cfg.box_height = get_int(grid, "box_height", cfg.box_height, 1, 4096, "grid.");
        cfg.box_width = get_int(grid, "box_width", cfg.box_width, 1, 4096, "grid.");
        cfg.stride = get_int(grid, "stride", cfg.stride, 1, 4096, "grid.");
        cfg.edge_exclusion = get_int(grid, "edge_exclusion", cfg.edge_exclusion, 0, 4096, "grid.");
    }
    if (root.contains("train")) {
        const json& train = root.at("train");
        check_keys(train, "train",
                   {"epochs", "batch_size", "learning_rate", "box_lo", "box_hi"});
        cfg.train.epochs = get_int(train, "epochs", cfg.train.epochs, 1, 100000, "train.");
        cfg.train.batch_size = get_int(train, "batch_size", cfg.train.batch_size, 1, 8192,
                                       "train.");
        cfg.train.learning_rate =
            get_double(train, "learning_rate", cfg.train.learning_rate, "train.");
        cfg.train.box_size_lo = get_int(train, "box_lo", cfg.train.box_size_lo, -1, 4096,
                                        "train.");
        cfg.train.box_size_hi = get_int(train, "box_hi", cfg.train.box_size_hi, -1, 4096,
                                        "train.");
    }
    if (root.contains("features")) {
        const json& features = root.at("features");
        check_keys(features, "features", {"kind"});
        if (features.contains("kind")) {
            if (!features.at("kind").is_string())
                bad_config("config key 'features.kind' must be a string");
            try {
                cfg.feature_kind =
                    feature_kind_from_string(features.at("kind").get<std::string>());
            } catch (const InvalidArgument& e) {
                bad_config(e.what());
            }
        }
    }
    if (root.contains("score")) {
        const json& score = root.at("score");
        check_keys(score, "score", {"methods", "trim", "shrinkage"});
        if (score.contains("methods")) {
            if (!score.at("methods").is_array())
                bad_config("config key 'score.methods' must be a list");
            cfg.methods.clear();
            for (const auto& m : score.at("methods")) {
                if (!m.is_string()) bad_config("config key 'score.methods' must hold strings");
                cfg.methods.push_back(m.get<std::string>());
            }
        }
        cfg.trim = get_int(score, "trim", cfg.trim, 0, 1024, "score.");
        cfg.shrinkage = get_double(score, "shrinkage", cfg.shrinkage, "score.");
    }
    if (root.contains("experiment")) {
        const json& experiment = root.at("experiment");
        check_keys(experiment, "experiment", {"set_sizes", "trials_per_size"});
        cfg.set_sizes = get_int_list(experiment, "set_sizes", cfg.set_sizes, "experiment.");
        cfg.trials_per_size =
            get_int(experiment, "trials_per_size", cfg.trials_per_size, 1, 1000000, "experiment.");
    }
    if (root.contains("data")) {
        const json& data = root.at("data");
        check_keys(data, "data", {"train", "holdout", "anomalies", "control"});
        cfg.data_train = get_int(data, "train", cfg.data_train, 1, 10000000, "data.");
        cfg.data_holdout = get_int(data, "holdout", cfg.data_holdout, 1, 10000000, "data.");
        cfg.data_anomalies = get_int(data, "anomalies", cfg.data_anomalies, 1, 10000000, "data.");
        cfg.data_control = get_int(data, "control", cfg.data_control, 1, 10000000, "data.");
    }
    if (root.contains("attribute")) {
        const json& attribute = root.at("attribute");
        check_keys(attribute, "attribute",
                   {"ae_train", "train_per_class", "val_per_class", "test_per_class",
                    "lambda_grid"});
        cfg.attr_ae_train =
            get_int(attribute, "ae_train", cfg.attr_ae_train, 1, 10000000, "attribute.");
        cfg.attr_train_per_class = get_int(attribute, "train_per_class", cfg.attr_train_per_class,
                                           2, 10000000, "attribute.");
        cfg.attr_val_per_class = get_int(attribute, "val_per_class", cfg.attr_val_per_class, 1,
                                         10000000, "attribute.");
        cfg.attr_test_per_class = get_int(attribute, "test_per_class", cfg.attr_test_per_class, 1,
                                          10000000, "attribute.");
        cfg.lambda_grid = get_int(attribute, "lambda_grid", cfg.lambda_grid, 1, 1000,
                                  "attribute.");
    }
    return cfg;
}

void write_provenance(const RunConfig& cfg, const std::string& command) {
    json record;
    record["command"] = command;
    record["seed"] = cfg.seed;
    record["config_hash"] = hash_label(cfg.raw.dump());
    record["versions"] = {{"npae", kVersion},
                          {"manifest", 1},
                          {"checkpoint", 1},
                          {"features", 1}};
    atomic_write_file(cfg.out / ("provenance-" + command + ".json"), record.dump(2) + "\n");
}

void ensure_out(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create " + cfg.out.string() + ": " + ec.message());
}

fs::path require_artifact(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path))
        throw MissingArtifact(path.string() + " not found; run `npae " + producer + "` first");
    return path;
}

std::vector<Image> load_split(const Manifest& manifest, Split split,
                              std::optional<ImageKind> kind) {
    std::vector<Image> images;
    for (std::size_t index : select_records(manifest, split, kind))
        images.push_back(load_record_image(manifest, manifest.records[index]));
    return images;
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const RunConfig& cfg) {
    ensure_out(cfg);
    const fs::path dir = cfg.out / "data";

    CorpusSpec spec;
    spec.directory = dir;
    spec.seed = cfg.seed;
    spec.height = cfg.arch.height;
    spec.width = cfg.arch.width;
    spec.channels = cfg.arch.channels;
    spec.threads = cfg.threads;

    Manifest manifest;
    manifest.root = dir;
    const auto add = [&](const std::string& prefix, int count, Split split, ImageKind kind) {
        CorpusSpec cohort = spec;
        cohort.prefix = prefix;
        cohort.count = count;
        cohort.split = split;
        cohort.kind = kind;
        Manifest part = generate_corpus(cohort);
        manifest.records.insert(manifest.records.end(),
                                std::make_move_iterator(part.records.begin()),
                                std::make_move_iterator(part.records.end()));
    };
    add("train", cfg.data_train, Split::Train, ImageKind::Typical);
    add("holdout", cfg.data_holdout, Split::Holdout, ImageKind::Typical);
    add("anomaly", cfg.data_anomalies, Split::Probe, ImageKind::Anomaly);
    add("control", cfg.data_control, Split::Probe, ImageKind::ControlTypical);

    save_manifest(dir / "manifest.tsv", manifest);
    write_provenance(cfg, "gen-data");
    std::cout << "wrote " << manifest.records.size() << " images under " << dir.string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    ensure_out(cfg);
    const Manifest manifest =
        load_manifest(require_artifact(cfg.out / "data" / "manifest.tsv", "gen-data"));
    const std::vector<Image> corpus = load_split(manifest, Split::Train, ImageKind::Typical);

    TrainHyper hyper = cfg.train;
    hyper.seed = derive_seed(cfg.seed, "train");
    hyper.verbose = true;
    const Checkpoint ckpt = train(corpus, cfg.arch, hyper);
    save_checkpoint(cfg.out / "model.npae", ckpt);
    write_provenance(cfg, "train");
    std::cout << "trained on " << corpus.size() << " images; final loss "
              << (ckpt.meta.loss_history.empty() ? 0.0 : ckpt.meta.loss_history.back()) << "\n";
    return 0;
}

struct PoolFile {
    const char* name;
    Split split;
    ImageKind kind;
};

constexpr PoolFile kPools[] = {
    {"holdout", Split::Holdout, ImageKind::Typical},
    {"anomaly", Split::Probe, ImageKind::Anomaly},
    {"control", Split::Probe, ImageKind::ControlTypical},
};

int cmd_features(const RunConfig& cfg) {
    ensure_out(cfg);
    const Manifest manifest =
        load_manifest(require_artifact(cfg.out / "data" / "manifest.tsv", "gen-data"));
    const Checkpoint ckpt = load_checkpoint(require_artifact(cfg.out / "model.npae", "train"));
    const Autoencoder model = Autoencoder::from_checkpoint(ckpt);
    const BoxGrid grid = grid_boxes(cfg.arch.height, cfg.arch.width, cfg.box_height,
                                    cfg.box_width, cfg.stride, cfg.edge_exclusion);

    for (const PoolFile& pool : kPools) {
        const std::vector<Image> images = load_split(manifest, pool.split, pool.kind);
        const FeatureMatrix matrix =
            extract_features(model, cfg.feature_kind, images, grid, cfg.threads);
        save_feature_matrix(cfg.out / ("features-" + std::string(pool.name) + ".tsv"), matrix);
        std::cout << "features-" << pool.name << ": " << matrix.ids.size() << " x "
                  << matrix.dimension << "\n";
    }
    write_provenance(cfg, "features");
    return 0;
}

FeatureMatrix load_pool_features(const RunConfig& cfg, const char* name) {
    return load_feature_matrix(
        require_artifact(cfg.out / ("features-" + std::string(name) + ".tsv"), "features"));
}

/// Population scoring against the holdout's moments; set-level methods
/// get their population analogue here (whitening fitted on holdout).
std::vector<double> population_scores(const std::string& method, const FeatureMatrix& holdout,
                                      const std::vector<std::vector<double>>& rows,
                                      const std::vector<std::string>& ids, const RunConfig& cfg,
                                      std::optional<LfdrModel>& lfdr_model) {
    const bool full = holdout.kind == FeatureKind::Code;
    std::vector<double> scores;
    scores.reserve(rows.size());

    if (method == "linf") {
        for (const auto& row : rows) scores.push_back(linf_score(row));
        return scores;
    }
    if (method == "mahalanobis" || method == "equivariant-linf") {
        const RobustMoments moments = full ? full_moments(holdout.values, cfg.shrinkage)
                                           : robust_moments(holdout.values, cfg.trim);
        if (method == "mahalanobis") {
            for (const auto& row : rows) scores.push_back(mahalanobis_score(row, moments));
            return scores;
        }
        // Whitened coordinates: λ(x - μ), then the L∞ norm.
        for (const auto& row : rows) {
            std::vector<double> centered(row.size());
            for (std::size_t d = 0; d < row.size(); ++d) centered[d] = row[d] - moments.mean[d];
            const auto white = equivariant_transform({centered}, moments);
            scores.push_back(linf_score(white.front()));
        }
        return scores;
    }
    if (method == "lfdr-linf") {
        if (!lfdr_model) {
            std::vector<double> base;
            base.reserve(holdout.values.size());
            for (const auto& row : holdout.values) base.push_back(linf_score(row));
            lfdr_model = fit_lfdr(base, true);
        }
        for (const auto& row : rows) scores.push_back(lfdr_score(*lfdr_model, linf_score(row)));
        return scores;
    }
    if (method == "random") {
        for (const auto& id : ids)
            scores.push_back(Rng(derive_seed(cfg.seed, "score-random:" + id)).next_double());
        return scores;
    }
    bad_config("unknown scoring method '" + method + "'");
}

int cmd_score(const RunConfig& cfg) {
    ensure_out(cfg);
    const FeatureMatrix holdout = load_pool_features(cfg, "holdout");
    const FeatureMatrix anomaly = load_pool_features(cfg, "anomaly");
    const FeatureMatrix control = load_pool_features(cfg, "control");

    std::vector<std::string> ids = holdout.ids;
    ids.insert(ids.end(), anomaly.ids.begin(), anomaly.ids.end());
    ids.insert(ids.end(), control.ids.begin(), control.ids.end());
    std::vector<std::vector<double>> rows = holdout.values;
    rows.insert(rows.end(), anomaly.values.begin(), anomaly.values.end());
    rows.insert(rows.end(), control.values.begin(), control.values.end());

    std::optional<LfdrModel> lfdr_model;
    for (const std::string& method : cfg.methods) {
        ScoreTable table;
        table.method = method;
        table.ids = ids;
        table.scores = population_scores(method, holdout, rows, ids, cfg, lfdr_model);
        save_score_table(cfg.out / ("scores-" + method + ".tsv"), table);
        std::cout << "scores-" << method << ": " << table.ids.size() << " images\n";
    }
    if (lfdr_model) save_lfdr_model(cfg.out / "lfdr-model.tsv", *lfdr_model);
    write_provenance(cfg, "score");
    return 0;
}

std::unique_ptr<SetScorer> make_scorer(const std::string& method, const FeatureMatrix& holdout,
                                       const RunConfig& cfg) {
    const bool full = holdout.kind == FeatureKind::Code;
    if (method == "linf") return std::make_unique<LinfSetScorer>();
    if (method == "mahalanobis")
        return std::make_unique<MahalanobisSetScorer>(cfg.trim, full, cfg.shrinkage);
    if (method == "equivariant-linf")
        return std::make_unique<EquivariantLinfSetScorer>(cfg.trim);
    if (method == "lfdr-linf") {
        std::vector<double> base;
        base.reserve(holdout.values.size());
        for (const auto& row : holdout.values) base.push_back(linf_score(row));
        return std::make_unique<LfdrLinfSetScorer>(fit_lfdr(base, true));
    }
    if (method == "random") return std::make_unique<RandomSetScorer>();
    bad_config("unknown scoring method '" + method + "'");
}

int cmd_eval_sets(const RunConfig& cfg) {
    ensure_out(cfg);
    const FeatureMatrix holdout_m = load_pool_features(cfg, "holdout");
    const FeaturePool holdout = pool_from_matrix(holdout_m);
    const FeaturePool anomalies = pool_from_matrix(load_pool_features(cfg, "anomaly"));
    const FeaturePool controls = pool_from_matrix(load_pool_features(cfg, "control"));

    std::vector<RecallCurve> curves;
    for (const std::string& method : cfg.methods) {
        const auto scorer = make_scorer(method, holdout_m, cfg);
        const std::uint64_t method_seed = derive_seed(cfg.seed, "sets:" + method);
        SetTrialsResult anomaly_run =
            run_set_trials(*scorer, holdout, anomalies, ImageKind::Anomaly, cfg.set_sizes,
                           cfg.trials_per_size, method_seed, cfg.threads);
        SetTrialsResult control_run = run_control(*scorer, holdout, controls, cfg.set_sizes,
                                                  cfg.trials_per_size, method_seed, cfg.threads);
        save_trial_records(cfg.out / ("trials-" + method + "-anomaly.tsv"), anomaly_run.records);
        save_trial_records(cfg.out / ("trials-" + method + "-control.tsv"), control_run.records);
        std::cout << method << ": recall@1";
        for (double r : anomaly_run.curve.recall_at_1) std::cout << ' ' << r;
        std::cout << "\n";
        curves.push_back(std::move(anomaly_run.curve));
        curves.push_back(std::move(control_run.curve));
    }
    save_recall_curves(cfg.out / "recall.tsv", curves);
    write_provenance(cfg, "eval-sets");
    return 0;
}

int cmd_eval_attr(const RunConfig& cfg) {
    ensure_out(cfg);
    const fs::path dir = cfg.out / "attr-data";

    CorpusSpec base;
    base.directory = dir;
    base.seed = cfg.seed;
    base.height = cfg.arch.height;
    base.width = cfg.arch.width;
    base.channels = cfg.arch.channels;
    base.threads = cfg.threads;

    Manifest manifest;
    manifest.root = dir;
    const auto cohort = [&](const std::string& prefix, int count, Split split, bool glasses) {
        CorpusSpec spec = base;
        spec.prefix = prefix;
        spec.count = count;
        spec.split = split;
        spec.glasses = glasses;
        Manifest part = generate_corpus(spec);
        std::vector<Image> images;
        images.reserve(part.records.size());
        for (const auto& record : part.records) images.push_back(load_record_image(part, record));
        manifest.records.insert(manifest.records.end(),
                                std::make_move_iterator(part.records.begin()),
                                std::make_move_iterator(part.records.end()));
        return images;
    };

    AttributeCorpus corpus;
    corpus.ae_train = cohort("attr-ae", cfg.attr_ae_train, Split::Train, false);
    const auto append_labeled = [](std::vector<Image>& into, std::vector<int>& labels,
                                   std::vector<Image> batch, int label) {
        for (auto& image : batch) {
            into.push_back(std::move(image));
            labels.push_back(label);
        }
    };
    append_labeled(corpus.sup_train, corpus.sup_train_labels,
                   cohort("attr-train-neg", cfg.attr_train_per_class, Split::Train, false), 0);
    append_labeled(corpus.sup_train, corpus.sup_train_labels,
                   cohort("attr-train-pos", cfg.attr_train_per_class, Split::Train, true), 1);
    append_labeled(corpus.sup_val, corpus.sup_val_labels,
                   cohort("attr-val-neg", cfg.attr_val_per_class, Split::Holdout, false), 0);
    append_labeled(corpus.sup_val, corpus.sup_val_labels,
                   cohort("attr-val-pos", cfg.attr_val_per_class, Split::Holdout, true), 1);
    append_labeled(corpus.test, corpus.test_labels,
                   cohort("attr-test-neg", cfg.attr_test_per_class, Split::Probe, false), 0);
    append_labeled(corpus.test, corpus.test_labels,
                   cohort("attr-test-pos", cfg.attr_test_per_class, Split::Probe, true), 1);
    save_manifest(dir / "manifest.tsv", manifest);

    AttributeExperimentConfig attr;
    attr.arch = cfg.arch;
    attr.train = cfg.train;
    attr.train.seed = derive_seed(cfg.seed, "attr-train");
    attr.train.verbose = true;
    attr.box_height = cfg.box_height;
    attr.box_width = cfg.box_width;
    attr.grid_stride = cfg.stride;
    attr.edge_exclusion = cfg.edge_exclusion;
    attr.lambda_grid = cfg.lambda_grid;
    attr.trim = cfg.trim;
    attr.shrinkage = cfg.shrinkage;
    attr.threads = cfg.threads;

    const std::vector<AttributeCell> cells = run_attribute_experiment(corpus, attr);
    save_attribute_table(cfg.out / "attr-table.tsv", cells);
    for (const auto& cell : cells)
        std::cout << cell.method << " / " << to_string(cell.kind)
                  << ": accuracy " << cell.report.accuracy << ", auc " << cell.report.auc << "\n";
    write_provenance(cfg, "eval-attr");
    return 0;
}

int cmd_report(const RunConfig& cfg) {
    ensure_out(cfg);
    const std::vector<RecallCurve> curves =
        load_recall_curves(require_artifact(cfg.out / "recall.tsv", "eval-sets"));
    if (curves.empty()) throw MissingArtifact("recall.tsv holds no curves; run `npae eval-sets`");

    std::set<std::string> method_names;
    for (const auto& curve : curves) method_names.insert(curve.method);
    for (const std::string& method : method_names) {
        std::string body = "set_size\tprobe_kind\trecall_at_1\trecall_at_5\trecall_at_10\n";
        for (const auto& curve : curves) {
            if (curve.method != method) continue;
            for (std::size_t i = 0; i < curve.set_sizes.size(); ++i) {
                char line[160];
                std::snprintf(line, sizeof(line), "%d\t%s\t%.9g\t%.9g\t%.9g\n",
                              curve.set_sizes[i], to_string(curve.probe_kind).c_str(),
                              curve.recall_at_1[i], curve.recall_at_5[i], curve.recall_at_10[i]);
                body += line;
            }
        }
        atomic_write_file(cfg.out / ("report-" + method + ".tsv"), body);
    }

    // Figure-3-style montage for the first configured method.
    const std::string lead = cfg.methods.empty() ? std::string("linf") : cfg.methods.front();
    const ScoreTable scores =
        load_score_table(require_artifact(cfg.out / ("scores-" + lead + ".tsv"), "score"));
    const auto records = load_trial_records(
        require_artifact(cfg.out / ("trials-" + lead + "-anomaly.tsv"), "eval-sets"));
    const Manifest manifest =
        load_manifest(require_artifact(cfg.out / "data" / "manifest.tsv", "gen-data"));
    std::map<std::string, std::string> id_to_path;
    for (const auto& record : manifest.records)
        id_to_path[record.id] = (manifest.root / record.path).string();
    save_decile_report(cfg.out / ("deciles-" + lead + ".tsv"),
                       decile_report(scores.ids, scores.scores, records), id_to_path);

    write_provenance(cfg, "report");
    std::cout << "report tables for " << method_names.size() << " methods\n";
    return 0;
}

std::vector<int> parse_int_csv(const std::string& text) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string item =
            text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        if (!item.empty()) out.push_back(std::stoi(item));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> parse_csv(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string item =
            text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        if (!item.empty()) out.push_back(item);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inpainting-autoencoder anomaly detection pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string sizes_override;
    std::string methods_override;
    std::string feature_kind_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> threads_override;
    std::optional<int> trials_override;

    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_override, "Output directory (overrides config)");
    app.add_option("--seed", seed_override, "Master seed (overrides config)");
    app.add_option("--threads", threads_override, "Worker thread cap");
    app.add_option("--set-sizes", sizes_override, "Comma-separated evaluation set sizes");
    app.add_option("--trials", trials_override, "Trials per set size");
    app.add_option("--methods", methods_override, "Comma-separated scoring methods");
    app.add_option("--feature-kind", feature_kind_override,
                   "inpaint-residual | raw-residual | code");

    const char* names[] = {"gen-data", "train",     "features", "score",
                           "eval-sets", "eval-attr", "report"};
    const char* descriptions[] = {"Generate the synthetic corpus",
                                  "Train the inpainting autoencoder",
                                  "Extract features for every evaluation pool",
                                  "Write per-image anomaly scores",
                                  "Run the set-recall trials and the paired control",
                                  "Run the proxy-attribute experiment",
                                  "Emit recall tables and the decile manifest"};
    for (std::size_t i = 0; i < std::size(names); ++i)
        app.add_subcommand(names[i], descriptions[i])->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        json raw = json::object();
        if (!config_path.empty()) {
            std::string text;
            try {
                text = read_file(config_path);
            } catch (const IoError& e) {
                throw ConfigError(e.what());
            }
            raw = json::parse(text, nullptr, false);
            if (raw.is_discarded()) throw ConfigError("config is not valid JSON: " + config_path);
            if (!raw.is_object()) throw ConfigError("config root must be an object");
        }
        RunConfig cfg = parse_config(raw);

        if (cfg.out.empty()) {
            const char* env = std::getenv("NPAE_OUT");
            cfg.out = env && *env ? fs::path(env) : fs::path("npae-out");
        }
        if (!out_override.empty()) cfg.out = out_override;
        if (seed_override) cfg.seed = *seed_override;
        if (threads_override) {
            if (*threads_override < 1) throw ConfigError("--threads must be positive");
            cfg.threads = *threads_override;
        }
        if (trials_override) {
            if (*trials_override < 1) throw ConfigError("--trials must be positive");
            cfg.trials_per_size = *trials_override;
        }
        if (!sizes_override.empty()) cfg.set_sizes = parse_int_csv(sizes_override);
        if (!methods_override.empty()) cfg.methods = parse_csv(methods_override);
        if (!feature_kind_override.empty()) {
            try {
                cfg.feature_kind = feature_kind_from_string(feature_kind_override);
            } catch (const InvalidArgument& e) {
                throw ConfigError(e.what());
            }
        }

        const std::string command = app.get_subcommands().front()->get_name();
        if (command == "gen-data") return cmd_gen_data(cfg);
        if (command == "train") return cmd_train(cfg);
        if (command == "features") return cmd_features(cfg);
        if (command == "score") return cmd_score(cfg);
        if (command == "eval-sets") return cmd_eval_sets(cfg);
        if (command == "eval-attr") return cmd_eval_attr(cfg);
        if (command == "report") return cmd_report(cfg);
        throw Error("unhandled command " + command);
    } catch (const ConfigError& e) {
        std::cerr << "error[config]: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifact& e) {
        std::cerr << "error[missing-artifact]: " << e.what() << "\n";
        return 3;
    } catch (const TrainingDiverged& e) {
        std::cerr << "error[numeric]: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
}
