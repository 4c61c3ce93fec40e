#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relval/backtest.hpp"
#include "relval/baselines.hpp"
#include "relval/csv.hpp"
#include "relval/data_model.hpp"
#include "relval/dataset_io.hpp"
#include "relval/encoding.hpp"
#include "relval/explain.hpp"
#include "relval/gbdt.hpp"
#include "relval/metrics.hpp"
#include "relval/proximity.hpp"
#include "relval/rng.hpp"
#include "relval/synthgen.hpp"
#include "relval/valuation.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relval;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    json j;
    in >> j;
    return j;
}

void dump_json(const json& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known)
            throw std::invalid_argument("unknown " + where + " key '" + item.key() + "'");
    }
}

std::string provenance_line(const json& effective_config, std::uint64_t seed) {
    return "relval " + tool_version() + " config=" + digest_string(effective_config.dump()) +
           " seed=" + std::to_string(seed);
}

Provenance provenance_of(const json& effective_config, std::uint64_t seed) {
    return {digest_string(effective_config.dump()), seed, tool_version()};
}

GeneratorConfig generator_from_json(const json& j) {
    GeneratorConfig g;
    g.n_bonds = j.value("n_bonds", g.n_bonds);
    g.n_states = j.value("n_states", g.n_states);
    g.seed = j.value("seed", g.seed);
    g.noise_std_oas = j.value("noise_std_oas", g.noise_std_oas);
    g.noise_std_yield = j.value("noise_std_yield", g.noise_std_yield);
    g.reversion_half_life_days =
        j.value("reversion_half_life_days", g.reversion_half_life_days);
    g.residual_std_yield = j.value("residual_std_yield", g.residual_std_yield);
    g.innovation_std_yield = j.value("innovation_std_yield", g.innovation_std_yield);
    g.trade_orders_per_day = j.value("trade_orders_per_day", g.trade_orders_per_day);
    g.horizon_days = j.value("horizon_days", g.horizon_days);
    return g;
}

TrainConfig train_from_json(const json& j) {
    check_keys(j, {"n_estimators", "max_depth", "max_borders", "min_samples_leaf",
                   "learning_rate", "feature_fraction", "seed", "early_stopping_rounds"},
               "train config");
    TrainConfig c;
    c.n_estimators = j.value("n_estimators", c.n_estimators);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.max_borders = j.value("max_borders", c.max_borders);
    c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.feature_fraction = j.value("feature_fraction", c.feature_fraction);
    c.seed = j.value("seed", c.seed);
    c.early_stopping_rounds = j.value("early_stopping_rounds", c.early_stopping_rounds);
    return c;
}

json train_to_json(const TrainConfig& c) {
    return json{{"n_estimators", c.n_estimators},
                {"max_depth", c.max_depth},
                {"max_borders", c.max_borders},
                {"min_samples_leaf", c.min_samples_leaf},
                {"learning_rate", c.learning_rate},
                {"feature_fraction", c.feature_fraction},
                {"seed", c.seed},
                {"early_stopping_rounds", c.early_stopping_rounds}};
}

struct PipelineConfig {
    double winsor_lower = 1.0;
    double winsor_upper = 99.0;
    SplitFractions fractions;
    int weight_window_days = 183;
    double weight_floor = 0.1;
    TrainConfig train;
};

PipelineConfig pipeline_from_json(const json& j) {
    PipelineConfig pc;
    if (j.contains("winsorize")) {
        const json& w = j.at("winsorize");
        check_keys(w, {"lower_pct", "upper_pct"}, "winsorize config");
        pc.winsor_lower = w.value("lower_pct", pc.winsor_lower);
        pc.winsor_upper = w.value("upper_pct", pc.winsor_upper);
    }
    if (j.contains("split")) {
        const json& s = j.at("split");
        check_keys(s, {"train", "valid", "test"}, "split config");
        pc.fractions.train = s.value("train", pc.fractions.train);
        pc.fractions.valid = s.value("valid", pc.fractions.valid);
        pc.fractions.test = s.value("test", pc.fractions.test);
    }
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        check_keys(w, {"window_days", "floor"}, "weights config");
        pc.weight_window_days = w.value("window_days", pc.weight_window_days);
        pc.weight_floor = w.value("floor", pc.weight_floor);
    }
    if (j.contains("train")) pc.train = train_from_json(j.at("train"));
    return pc;
}

struct Folds {
    Dataset train;
    Dataset valid;
    Dataset test;
};

// Shared preprocessing: winsorize targets, attach recency weights, split.
Folds prepare_folds(const Dataset& raw, const PipelineConfig& pc, std::uint64_t seed) {
    Dataset ds = winsorize_targets(raw, pc.winsor_lower, pc.winsor_upper);
    ds.sample_weights = compute_sample_weights(ds, pc.weight_window_days, pc.weight_floor);
    const SplitIndices idx =
        split_dataset(ds, derive_seed(seed, rng_tag::kSplit), pc.fractions);
    return {take(ds, idx.train), take(ds, idx.valid), take(ds, idx.test)};
}

Dataset load_data_dir(const std::string& dir) {
    return load_dataset((fs::path(dir) / "dataset.csv").string(),
                        (fs::path(dir) / "dataset.schema.json").string());
}

std::vector<std::string> ids_of(const Dataset& ds) {
    std::vector<std::string> ids;
    ids.reserve(ds.size());
    for (const auto& rec : ds.records) ids.push_back(rec.id);
    return ids;
}

std::vector<std::size_t> all_positions(const Dataset& ds) {
    std::vector<std::size_t> positions(ds.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    return positions;
}

RankMethod parse_method(const std::string& token) {
    if (token == "yield") return RankMethod::kYield;
    if (token == "dxs_cohort") return RankMethod::kDxsCohort;
    if (token == "similarity_cohort") return RankMethod::kSimilarityCohort;
    throw std::invalid_argument("unknown ranking method '" + token + "'");
}

json metrics_json(const Metrics& m) {
    return json{{"r2", m.r2 ? json(*m.r2) : json()},
                {"mse", m.mse},
                {"mae", m.mae},
                {"mape", m.mape}};
}

json fold_metrics(const GBDTModel& model, const Dataset& fold) {
    const auto pred = predict(model, fold);
    std::vector<std::vector<double>> actual(fold.size());
    for (std::size_t i = 0; i < fold.size(); ++i) actual[i] = fold.records[i].targets;

    json out{{"records", fold.size()}, {"multirmse", multirmse(pred, actual)}};
    for (std::size_t d = 0; d < fold.schema.n_targets(); ++d) {
        std::vector<double> p(fold.size()), a(fold.size());
        for (std::size_t i = 0; i < fold.size(); ++i) {
            p[i] = pred[i][d];
            a[i] = actual[i][d];
        }
        out[fold.schema.target_names[d]] = metrics_json(evaluate(p, a));
    }
    return out;
}

ProximityIndex model_index(const GBDTModel& model, const Dataset& ds, std::size_t threads) {
    return boosted_index(apply_leaves(model, ds, threads), ids_of(ds), model.error_trace);
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_datagen(const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed) {
    json cfg = load_json(config_path);
    check_keys(cfg,
               {"n_bonds", "n_states", "seed", "noise_std_oas", "noise_std_yield",
                "target_r2_oas", "target_r2_yield", "reversion_half_life_days",
                "residual_std_yield", "innovation_std_yield", "trade_orders_per_day",
                "horizon_days"},
               "generator config");
    GeneratorConfig g = generator_from_json(cfg);
    if (seed) g.seed = *seed;
    cfg["seed"] = g.seed;

    const Dataset universe = generate_universe(g);
    if (cfg.contains("target_r2_oas") || cfg.contains("target_r2_yield")) {
        GeneratorConfig noiseless = g;
        noiseless.noise_std_oas = 0.0;
        noiseless.noise_std_yield = 0.0;
        const GeneratedTargets probe = generate_targets(universe, noiseless);
        if (cfg.contains("target_r2_oas"))
            g.noise_std_oas =
                noise_for_target_r2(probe.fair_oas, cfg.at("target_r2_oas").get<double>());
        if (cfg.contains("target_r2_yield"))
            g.noise_std_yield = noise_for_target_r2(probe.fair_yield,
                                                    cfg.at("target_r2_yield").get<double>());
    }
    const GeneratedTargets targets = generate_targets(universe, g);
    const MarketPath paths = generate_paths(targets, g);
    const TradeOrderBook orders = generate_orders(targets.dataset, g);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    save_dataset(targets.dataset, (out / "dataset.csv").string(),
                 (out / "dataset.schema.json").string(), provenance_of(cfg, g.seed));
    save_paths(paths, (out / "paths.csv").string());
    save_orders(orders, targets.dataset, (out / "orders.csv").string());
    dump_json(json{{"command", "datagen"},
                   {"config_digest", digest_string(cfg.dump())},
                   {"seed", g.seed},
                   {"tool_version", tool_version()}},
              (out / "provenance.json").string());

    std::cout << "wrote " << targets.dataset.size() << " bonds, " << g.horizon_days
              << " path days, " << orders.days.size() << " order days to " << out_dir
              << "\n";
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& model_path, std::string metrics_path,
              std::optional<std::uint64_t> seed) {
    json cfg = config_path.empty() ? json::object() : load_json(config_path);
    check_keys(cfg, {"format", "version", "provenance", "winsorize", "split", "weights",
                     "train"},
               "train config");
    PipelineConfig pc = pipeline_from_json(cfg);
    if (seed) pc.train.seed = *seed;
    cfg["train"] = train_to_json(pc.train);

    const Dataset raw = load_data_dir(data_dir);
    const Folds folds = prepare_folds(raw, pc, pc.train.seed);
    const GBDTModel model = train(folds.train, folds.valid, pc.train);
    save_model(model, model_path);

    if (metrics_path.empty()) metrics_path = model_path + ".metrics.json";
    dump_json(json{{"format", "relval-metrics"},
                   {"version", 1},
                   {"provenance", provenance_line(cfg, pc.train.seed)},
                   {"folds",
                    {{"train", fold_metrics(model, folds.train)},
                     {"valid", fold_metrics(model, folds.valid)},
                     {"test", fold_metrics(model, folds.test)}}}},
              metrics_path);

    std::cout << "model: " << model_path << " (" << model.trees.size() << " trees)\n"
              << "metrics: " << metrics_path << "\n";
    return 0;
}

int cmd_baselines(const std::string& data_dir, const std::string& out_dir,
                  const std::string& target, const std::string& config_path,
                  std::optional<std::uint64_t> seed_override) {
    json cfg = config_path.empty() ? json::object() : load_json(config_path);
    check_keys(cfg, {"winsorize", "split", "weights", "seed", "tree", "forest", "net"},
               "baselines config");
    const std::uint64_t seed =
        seed_override ? *seed_override : cfg.value("seed", std::uint64_t{0});
    cfg["seed"] = seed;

    TreeConfig tree_cfg;
    tree_cfg.max_depth = 12;
    tree_cfg.min_samples_leaf = 25.0;
    if (cfg.contains("tree")) {
        const json& t = cfg.at("tree");
        check_keys(t, {"max_depth", "min_samples_leaf", "max_features", "max_borders"},
                   "tree config");
        tree_cfg.max_depth = t.value("max_depth", tree_cfg.max_depth);
        tree_cfg.min_samples_leaf = t.value("min_samples_leaf", tree_cfg.min_samples_leaf);
        tree_cfg.max_features = t.value("max_features", tree_cfg.max_features);
        tree_cfg.max_borders = t.value("max_borders", tree_cfg.max_borders);
    }
    tree_cfg.seed = seed;

    ForestConfig forest_cfg;
    forest_cfg.max_depth = 12;
    forest_cfg.min_samples_leaf = 5.0;
    if (cfg.contains("forest")) {
        const json& f = cfg.at("forest");
        check_keys(f,
                   {"n_estimators", "max_depth", "min_samples_leaf", "max_features",
                    "max_borders", "bootstrap"},
                   "forest config");
        forest_cfg.n_estimators = f.value("n_estimators", forest_cfg.n_estimators);
        forest_cfg.max_depth = f.value("max_depth", forest_cfg.max_depth);
        forest_cfg.min_samples_leaf =
            f.value("min_samples_leaf", forest_cfg.min_samples_leaf);
        forest_cfg.max_features = f.value("max_features", forest_cfg.max_features);
        forest_cfg.max_borders = f.value("max_borders", forest_cfg.max_borders);
        forest_cfg.bootstrap = f.value("bootstrap", forest_cfg.bootstrap);
    }
    forest_cfg.seed = seed;

    NetConfig net_cfg;
    net_cfg.alpha = 1e-3;
    net_cfg.max_iter = 2000;
    if (cfg.contains("net")) {
        const json& n = cfg.at("net");
        check_keys(n, {"alpha", "l1_ratio", "max_iter", "tol"}, "net config");
        net_cfg.alpha = n.value("alpha", net_cfg.alpha);
        net_cfg.l1_ratio = n.value("l1_ratio", net_cfg.l1_ratio);
        net_cfg.max_iter = n.value("max_iter", net_cfg.max_iter);
        net_cfg.tol = n.value("tol", net_cfg.tol);
    }

    std::vector<std::size_t> dims;
    if (target == "both") dims = {0, 1};
    else if (target == "oas") dims = {0};
    else if (target == "yield") dims = {1};
    else throw std::invalid_argument("unknown target '" + target + "'");

    const Dataset raw = load_data_dir(data_dir);
    const PipelineConfig pc = pipeline_from_json(cfg);
    const Folds folds = prepare_folds(raw, pc, seed);

    const OrderedEncoding enc =
        fit_ordered_encoding(folds.train, 0, derive_seed(seed, rng_tag::kEncoding));
    const std::vector<std::pair<std::string, const Dataset*>> fold_list = {
        {"train", &folds.train}, {"valid", &folds.valid}, {"test", &folds.test}};

    fs::create_directories(out_dir);
    csv::Writer out((fs::path(out_dir) / "baselines.csv").string());
    out.comment(provenance_line(cfg, seed));
    out.row({"model", "target", "fold", "r2", "mse", "mae", "mape"});

    for (std::size_t dim : dims) {
        const std::string& target_name = raw.schema.target_names[dim];
        std::vector<double> y_train(folds.train.size());
        for (std::size_t i = 0; i < folds.train.size(); ++i)
            y_train[i] = folds.train.records[i].targets[dim];

        const DecisionTreeModel dt =
            train_decision_tree(enc.columns, y_train, folds.train.sample_weights, tree_cfg);
        const RandomForestModel rf =
            train_random_forest(enc.columns, y_train, folds.train.sample_weights, forest_cfg);
        const ElasticNetModel net = train_elastic_net(enc.columns, y_train, net_cfg);

        for (const auto& [fold_name, fold] : fold_list) {
            const auto columns =
                fold == &folds.train ? enc.columns : transform(enc.encoder, *fold);
            std::vector<double> actual(fold->size());
            for (std::size_t i = 0; i < fold->size(); ++i)
                actual[i] = fold->records[i].targets[dim];

            const auto emit = [&](const std::string& model_name, auto&& predict_row) {
                std::vector<double> pred(fold->size());
                for (std::size_t i = 0; i < fold->size(); ++i) pred[i] = predict_row(i);
                const Metrics m = evaluate(pred, actual);
                out.row({model_name, target_name, fold_name,
                         m.r2 ? csv::format_double(*m.r2) : "", csv::format_double(m.mse),
                         csv::format_double(m.mae), csv::format_double(m.mape)});
            };
            emit("decision_tree", [&](std::size_t i) { return dt.predict_row(columns, i); });
            emit("random_forest", [&](std::size_t i) { return rf.predict_row(columns, i); });
            emit("elastic_net", [&](std::size_t i) { return net.predict_row(columns, i); });
        }
    }

    std::cout << "baselines table: " << (fs::path(out_dir) / "baselines.csv").string()
              << "\n";
    return 0;
}

int cmd_tune(const std::string& data_dir, const std::string& out_dir, std::size_t trials,
             std::uint64_t seed, const std::string& config_path) {
    json cfg = config_path.empty() ? json::object() : load_json(config_path);
    check_keys(cfg, {"winsorize", "split", "weights", "space"}, "tune config");

    TuneSpace space;
    if (cfg.contains("space")) {
        const json& s = cfg.at("space");
        check_keys(s,
                   {"estimators_lo", "estimators_hi", "estimators_step", "depth_lo",
                    "depth_hi", "depth_cap", "min_samples_lo", "min_samples_hi",
                    "min_samples_step", "learning_rate_lo", "learning_rate_hi",
                    "feature_fraction_lo", "feature_fraction_hi", "max_borders",
                    "early_stopping_rounds"},
                   "search space");
        space.estimators_lo = s.value("estimators_lo", space.estimators_lo);
        space.estimators_hi = s.value("estimators_hi", space.estimators_hi);
        space.estimators_step = s.value("estimators_step", space.estimators_step);
        space.depth_lo = s.value("depth_lo", space.depth_lo);
        space.depth_hi = s.value("depth_hi", space.depth_hi);
        space.depth_cap = s.value("depth_cap", space.depth_cap);
        space.min_samples_lo = s.value("min_samples_lo", space.min_samples_lo);
        space.min_samples_hi = s.value("min_samples_hi", space.min_samples_hi);
        space.min_samples_step = s.value("min_samples_step", space.min_samples_step);
        space.learning_rate_lo = s.value("learning_rate_lo", space.learning_rate_lo);
        space.learning_rate_hi = s.value("learning_rate_hi", space.learning_rate_hi);
        space.feature_fraction_lo = s.value("feature_fraction_lo", space.feature_fraction_lo);
        space.feature_fraction_hi = s.value("feature_fraction_hi", space.feature_fraction_hi);
        space.max_borders = s.value("max_borders", space.max_borders);
        space.early_stopping_rounds =
            s.value("early_stopping_rounds", space.early_stopping_rounds);
    }
    cfg["seed"] = seed;

    const Dataset raw = load_data_dir(data_dir);
    const PipelineConfig pc = pipeline_from_json(cfg);
    const Folds folds = prepare_folds(raw, pc, seed);
    const TuneResult result =
        random_search_tune(folds.train, folds.valid, space, trials, seed);

    fs::create_directories(out_dir);
    csv::Writer trial_log((fs::path(out_dir) / "trials.csv").string());
    trial_log.comment(provenance_line(cfg, seed));
    trial_log.row({"trial", "n_estimators", "max_depth", "min_samples_leaf", "learning_rate",
                   "feature_fraction", "trees_kept", "valid_multirmse"});
    for (std::size_t t = 0; t < result.trials.size(); ++t) {
        const TuneTrial& trial = result.trials[t];
        trial_log.row({std::to_string(t), std::to_string(trial.config.n_estimators),
                       std::to_string(trial.config.max_depth),
                       csv::format_double(trial.config.min_samples_leaf),
                       csv::format_double(trial.config.learning_rate),
                       csv::format_double(trial.config.feature_fraction),
                       std::to_string(trial.trees_kept),
                       csv::format_double(trial.valid_multirmse)});
    }
    dump_json(json{{"format", "relval-train-config"},
                   {"version", 1},
                   {"provenance", provenance_line(cfg, seed)},
                   {"train", train_to_json(result.best)}},
              (fs::path(out_dir) / "best_config.json").string());

    std::cout << "best valid multirmse " << csv::format_double(result.best_score) << " after "
              << result.trials.size() << " trials; config: "
              << (fs::path(out_dir) / "best_config.json").string() << "\n";
    return 0;
}

int cmd_proximity(const std::string& model_path, const std::string& data_dir, std::size_t k,
                  const std::string& out_path, std::size_t threads) {
    const GBDTModel model = load_model(model_path);
    const Dataset ds = load_data_dir(data_dir);
    const ProximityIndex index = model_index(model, ds, threads);
    const auto positions = all_positions(ds);
    const json eff{{"command", "proximity"}, {"model", model_path}, {"data", data_dir},
                   {"k", k}};
    write_neighbor_table(out_path, index, positions, positions, k,
                         provenance_line(eff, model.config.seed));
    std::cout << "neighbor table: " << out_path << "\n";
    return 0;
}

int cmd_explain(const std::string& model_path, const std::string& data_dir,
                const std::string& out_dir, std::size_t threads) {
    const GBDTModel model = load_model(model_path);
    const Dataset ds = load_data_dir(data_dir);
    const Attribution attribution = tree_shap(model, ds, threads);
    const json eff{{"command", "explain"}, {"model", model_path}, {"data", data_dir}};
    const std::string prov = provenance_line(eff, model.config.seed);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    write_attribution_csv((out / "attribution.csv").string(), attribution, prov);
    write_importance_json((out / "importance.json").string(), attribution, prov);
    std::cout << "attributions for " << ds.size() << " records: " << out_dir << "\n";
    return 0;
}

int cmd_rank(const std::string& model_path, const std::string& snapshot_path,
             const std::string& method_token, std::size_t k, const std::string& out_path,
             const std::string& date, std::size_t threads) {
    const RankMethod method = parse_method(method_token);
    const GBDTModel model = load_model(model_path);

    std::string sidecar = snapshot_path;
    const std::string suffix = ".csv";
    if (sidecar.size() > suffix.size() &&
        sidecar.compare(sidecar.size() - suffix.size(), suffix.size(), suffix) == 0)
        sidecar.resize(sidecar.size() - suffix.size());
    sidecar += ".schema.json";
    const Dataset snapshot = load_dataset(snapshot_path, sidecar);

    ProximityIndex index;
    if (method == RankMethod::kSimilarityCohort)
        index = model_index(model, snapshot, threads);

    std::vector<std::pair<GroupKey, RankedList>> rankings;
    for (const auto& group : build_generic_groups(snapshot)) {
        switch (method) {
            case RankMethod::kYield:
                rankings.emplace_back(group.key, rank_by_yield(snapshot, group));
                break;
            case RankMethod::kDxsCohort:
                rankings.emplace_back(group.key, rank_by_dxs_cohort(snapshot, group, k));
                break;
            case RankMethod::kSimilarityCohort:
                rankings.emplace_back(group.key,
                                      rank_by_similarity_cohort(snapshot, group, index, k));
                break;
        }
    }

    const json eff{{"command", "rank"}, {"model", model_path}, {"snapshot", snapshot_path},
                   {"method", method_token}, {"k", k}, {"date", date}};
    write_rankings_csv(out_path, date, rankings, provenance_line(eff, model.config.seed));
    std::cout << "ranked " << rankings.size() << " groups (" << snapshot.size()
              << " bonds) by " << method_token << ": " << out_path << "\n";
    return 0;
}

int cmd_backtest(const std::string& config_path, const std::string& out_dir,
                 std::size_t threads, std::optional<std::uint64_t> seed_override) {
    json cfg = load_json(config_path);
    check_keys(cfg, {"data", "model", "seed", "backtest"}, "backtest config");
    const std::string data_dir = cfg.at("data").get<std::string>();
    const std::string model_path = cfg.at("model").get<std::string>();
    const std::uint64_t seed =
        seed_override ? *seed_override : cfg.value("seed", std::uint64_t{0});
    cfg["seed"] = seed;

    BacktestConfig bc;
    if (cfg.contains("backtest")) {
        const json& b = cfg.at("backtest");
        check_keys(b, {"start_day", "month_days", "horizons", "k_values", "methods", "top_m"},
                   "backtest section");
        bc.start_day = b.value("start_day", bc.start_day);
        bc.month_days = b.value("month_days", bc.month_days);
        bc.horizons = b.value("horizons", bc.horizons);
        bc.k_values = b.value("k_values", bc.k_values);
        bc.top_m = b.value("top_m", bc.top_m);
        if (b.contains("methods")) {
            bc.methods.clear();
            for (const auto& token : b.at("methods"))
                bc.methods.push_back(parse_method(token.get<std::string>()));
        }
    }

    const Dataset universe = load_data_dir(data_dir);
    const MarketPath paths = load_paths((fs::path(data_dir) / "paths.csv").string());
    const TradeOrderBook orders =
        load_orders((fs::path(data_dir) / "orders.csv").string(), universe);
    const GBDTModel model = load_model(model_path);

    ProximityIndex index;
    for (RankMethod method : bc.methods)
        if (method == RankMethod::kSimilarityCohort) {
            index = model_index(model, universe, threads);
            break;
        }

    const BacktestReport report = run_backtest(universe, paths, orders, index, bc);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    const std::string prov = provenance_line(cfg, seed);
    write_report_json((out / "report.json").string(), report, prov);
    write_scores_csv((out / "scores.csv").string(), report, prov);

    if (!report.empty_days.empty())
        std::cerr << "note: " << report.empty_days.size()
                  << " day(s) without orders were skipped\n";
    std::cout << "backtest report: " << (out / "report.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Similarity-driven relative valuation toolkit"};
    app.require_subcommand(1);

    struct {
        std::string config, out;
        std::uint64_t seed = 0;
    } dg;
    auto* datagen = app.add_subcommand("datagen", "Generate a synthetic bond market");
    datagen->add_option("--config", dg.config, "Generator config JSON")->required();
    datagen->add_option("--out", dg.out, "Output directory")->required();
    auto* dg_seed = datagen->add_option("--seed", dg.seed, "Override the config seed");

    struct {
        std::string data, config, model, metrics;
        std::uint64_t seed = 0;
    } tr;
    auto* train_cmd = app.add_subcommand("train", "Train the boosted similarity model");
    train_cmd->add_option("--data", tr.data, "Data directory from datagen")->required();
    train_cmd->add_option("--config", tr.config, "Pipeline config JSON");
    train_cmd->add_option("--model", tr.model, "Output model file")->required();
    train_cmd->add_option("--metrics", tr.metrics,
                          "Metrics JSON path (default: <model>.metrics.json)");
    auto* tr_seed = train_cmd->add_option("--seed", tr.seed, "Override the config seed");

    struct {
        std::string data, out, target = "both", config;
        std::uint64_t seed = 0;
    } bl;
    auto* baselines_cmd =
        app.add_subcommand("baselines", "Train reference models and tabulate metrics");
    baselines_cmd->add_option("--data", bl.data, "Data directory from datagen")->required();
    baselines_cmd->add_option("--out", bl.out, "Output directory")->required();
    baselines_cmd->add_option("--target", bl.target, "Target: oas, yield or both")
        ->capture_default_str();
    baselines_cmd->add_option("--config", bl.config, "Baselines config JSON");
    auto* bl_seed = baselines_cmd->add_option("--seed", bl.seed, "Override the config seed");

    struct {
        std::string data, out, config;
        std::size_t trials = 20;
        std::uint64_t seed = 1;
    } tn;
    auto* tune_cmd = app.add_subcommand("tune", "Random search over training settings");
    tune_cmd->add_option("--data", tn.data, "Data directory from datagen")->required();
    tune_cmd->add_option("--out", tn.out, "Output directory")->required();
    tune_cmd->add_option("--trials", tn.trials, "Number of trials")->capture_default_str();
    tune_cmd->add_option("--seed", tn.seed, "Search seed")->capture_default_str();
    tune_cmd->add_option("--config", tn.config, "Tune config JSON");

    struct {
        std::string model, data, out;
        std::size_t k = 10, threads = 1;
    } px;
    auto* proximity_cmd =
        app.add_subcommand("proximity", "Nearest neighbors by model proximity");
    proximity_cmd->add_option("--model", px.model, "Trained model file")->required();
    proximity_cmd->add_option("--data", px.data, "Data directory")->required();
    proximity_cmd->add_option("--k", px.k, "Neighbors per query")->capture_default_str();
    proximity_cmd->add_option("--out", px.out, "Output CSV")->required();
    proximity_cmd->add_option("--threads", px.threads, "Worker threads")
        ->capture_default_str();

    struct {
        std::string model, data, out;
        std::size_t threads = 1;
    } ex;
    auto* explain_cmd = app.add_subcommand("explain", "Per-feature attributions");
    explain_cmd->add_option("--model", ex.model, "Trained model file")->required();
    explain_cmd->add_option("--data", ex.data, "Data directory")->required();
    explain_cmd->add_option("--out", ex.out, "Output directory")->required();
    explain_cmd->add_option("--threads", ex.threads, "Worker threads")
        ->capture_default_str();

    struct {
        std::string model, snapshot, method, out = "rankings.csv", date = "snapshot";
        std::size_t k = 10, threads = 1;
    } rk;
    auto* rank_cmd = app.add_subcommand("rank", "Rank bonds within generic groups");
    rank_cmd->add_option("--model", rk.model, "Trained model file")->required();
    rank_cmd->add_option("--snapshot", rk.snapshot, "Snapshot dataset CSV")->required();
    rank_cmd
        ->add_option("--method", rk.method, "yield, dxs_cohort or similarity_cohort")
        ->required();
    rank_cmd->add_option("--k", rk.k, "Cohort size")->capture_default_str();
    rank_cmd->add_option("--out", rk.out, "Output CSV")->capture_default_str();
    rank_cmd->add_option("--date", rk.date, "Date label for the CSV")
        ->capture_default_str();
    rank_cmd->add_option("--threads", rk.threads, "Worker threads")->capture_default_str();

    struct {
        std::string config, out;
        std::size_t threads = 1;
        std::uint64_t seed = 0;
    } bt;
    auto* backtest_cmd = app.add_subcommand("backtest", "Multi-horizon ranking back-test");
    backtest_cmd->add_option("--config", bt.config, "Backtest config JSON")->required();
    backtest_cmd->add_option("--out", bt.out, "Output directory")->required();
    backtest_cmd->add_option("--threads", bt.threads, "Worker threads")
        ->capture_default_str();
    auto* bt_seed = backtest_cmd->add_option("--seed", bt.seed, "Override the config seed");

    try {
        app.parse(argc, argv);
        const auto opt_seed = [](const CLI::Option* opt,
                                 std::uint64_t value) -> std::optional<std::uint64_t> {
            if (opt->count() > 0) return value;
            return std::nullopt;
        };
        if (*datagen) return cmd_datagen(dg.config, dg.out, opt_seed(dg_seed, dg.seed));
        if (*train_cmd)
            return cmd_train(tr.data, tr.config, tr.model, tr.metrics,
                             opt_seed(tr_seed, tr.seed));
        if (*baselines_cmd)
            return cmd_baselines(bl.data, bl.out, bl.target, bl.config,
                                 opt_seed(bl_seed, bl.seed));
        if (*tune_cmd) return cmd_tune(tn.data, tn.out, tn.trials, tn.seed, tn.config);
        if (*proximity_cmd)
            return cmd_proximity(px.model, px.data, px.k, px.out, px.threads);
        if (*explain_cmd) return cmd_explain(ex.model, ex.data, ex.out, ex.threads);
        if (*rank_cmd)
            return cmd_rank(rk.model, rk.snapshot, rk.method, rk.k, rk.out, rk.date,
                            rk.threads);
        if (*backtest_cmd)
            return cmd_backtest(bt.config, bt.out, bt.threads, opt_seed(bt_seed, bt.seed));
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
