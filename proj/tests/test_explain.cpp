#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "relval/csv.hpp"
#include "relval/explain.hpp"
#include "relval/gbdt.hpp"
#include "relval/rng.hpp"
#include "relval/synthgen.hpp"

using namespace relval;

namespace {

Dataset numeric_dataset(std::size_t n_features, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    for (std::size_t f = 0; f < n_features; ++f)
        ds.schema.features.push_back(
            {"x" + std::to_string(f), FeatureKind::Numerical, ""});
    ds.schema.target_names = {"oas", "yield"};
    for (std::size_t i = 0; i < n; ++i) {
        BondRecord rec;
        rec.id = "b" + std::to_string(i);
        rec.feature_cat.assign(n_features, "");
        for (std::size_t f = 0; f < n_features; ++f)
            rec.feature_num.push_back(rng.uniform(-2.0, 2.0));
        const double base = rec.feature_num[0] * rec.feature_num[1 % n_features] +
                            0.5 * rec.feature_num[(n_features - 1) % n_features];
        rec.targets = {3.0 * base + 1.0, base};
        rec.duration = 1.0;
        rec.dxs = rec.targets[0];
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

// Cover-weighted conditional expectation of one tree given the features in
// `mask`; empty branches contribute zero, exactly as the production path.
double cond_exp(const ObliviousTree& tree, const std::vector<std::vector<double>>& covers,
                const std::vector<double>& row, unsigned mask, std::size_t dim,
                std::size_t level, std::size_t prefix) {
    if (level == tree.depth()) return tree.leaf_values[prefix][dim];
    const auto& split = tree.splits[level];
    const std::size_t right = prefix | (std::size_t{1} << level);
    if (mask & (1u << split.feature)) {
        const std::size_t hot = row[split.feature] > split.threshold ? right : prefix;
        if (covers[level + 1][hot] <= 0.0) return 0.0;
        return cond_exp(tree, covers, row, mask, dim, level + 1, hot);
    }
    const double r = covers[level][prefix];
    double acc = 0.0;
    for (const std::size_t child : {prefix, right})
        if (covers[level + 1][child] > 0.0)
            acc += covers[level + 1][child] / r *
                   cond_exp(tree, covers, row, mask, dim, level + 1, child);
    return acc;
}

std::vector<std::vector<double>> tree_covers(const ObliviousTree& tree) {
    std::vector<std::vector<double>> covers(tree.depth() + 1);
    covers[tree.depth()] = tree.leaf_weights;
    for (std::size_t level = tree.depth(); level-- > 0;) {
        covers[level].assign(std::size_t{1} << level, 0.0);
        for (std::size_t p = 0; p < covers[level].size(); ++p)
            covers[level][p] =
                covers[level + 1][p] + covers[level + 1][p | (std::size_t{1} << level)];
    }
    return covers;
}

double factorial(unsigned n) {
    double acc = 1.0;
    for (unsigned i = 2; i <= n; ++i) acc *= i;
    return acc;
}

// Exponential-subset Shapley oracle over the whole ensemble, in raw units.
std::vector<double> brute_force_phi(const GBDTModel& model,
                                    const std::vector<std::vector<double>>& columns,
                                    std::size_t record, std::size_t dim,
                                    std::size_t n_features) {
    std::vector<double> row(n_features, 0.0);
    for (std::size_t f = 0; f < n_features; ++f) row[f] = columns[f][record];

    std::vector<double> exp_by_mask(1u << n_features, 0.0);
    for (unsigned mask = 0; mask < exp_by_mask.size(); ++mask) {
        double acc = model.base_prediction[dim];
        for (const auto& tree : model.trees) {
            const auto covers = tree_covers(tree);
            if (covers[0][0] <= 0.0) continue;
            acc += cond_exp(tree, covers, row, mask, dim, 0, 0);
        }
        exp_by_mask[mask] = acc;
    }

    const double m = static_cast<double>(n_features);
    std::vector<double> phi(n_features, 0.0);
    for (std::size_t f = 0; f < n_features; ++f) {
        for (unsigned mask = 0; mask < exp_by_mask.size(); ++mask) {
            if (mask & (1u << f)) continue;
            const unsigned size = static_cast<unsigned>(__builtin_popcount(mask));
            const double weight =
                factorial(size) * factorial(static_cast<unsigned>(m) - size - 1) /
                factorial(static_cast<unsigned>(m));
            phi[f] += weight * (exp_by_mask[mask | (1u << f)] - exp_by_mask[mask]);
        }
        phi[f] *= model.standardization.std[dim];
    }
    return phi;
}

void check_local_accuracy(const GBDTModel& model, const Dataset& ds, double tol) {
    const auto attribution = tree_shap(model, ds);
    const auto preds = predict(model, ds);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t d = 0; d < model.n_targets(); ++d) {
            double acc = attribution.base[d];
            for (const auto& per_feature : attribution.phi[i]) acc += per_feature[d];
            CHECK(std::abs(acc - preds[i][d]) <= tol);
        }
}

GBDTModel identity_model(const FeatureSchema& schema, std::size_t n_targets) {
    GBDTModel model;
    model.schema_fingerprint = schema.fingerprint();
    model.base_prediction.assign(n_targets, 0.0);
    model.standardization.mean.assign(n_targets, 0.0);
    model.standardization.std.assign(n_targets, 1.0);
    return model;
}

}  // namespace

TEST_CASE("a model with no trees attributes nothing") {
    auto ds = numeric_dataset(3, 40, 5);
    TrainConfig config;
    config.n_estimators = 0;
    auto model = train(ds, config);
    REQUIRE(model.trees.empty());

    auto attribution = tree_shap(model, ds);
    REQUIRE(attribution.base.size() == 2);
    CHECK(attribution.base[0] == doctest::Approx(model.standardization.mean[0]));
    CHECK(attribution.base[1] == doctest::Approx(model.standardization.mean[1]));
    for (const auto& record : attribution.phi)
        for (const auto& per_feature : record)
            for (double v : per_feature) CHECK(v == 0.0);
}

TEST_CASE("a single depth-one tree credits its split feature alone") {
    Dataset ds = numeric_dataset(3, 4, 9);
    for (std::size_t i = 0; i < 4; ++i) {
        ds.records[i].feature_num = {i < 2 ? 0.0 : 1.0, 5.0, -1.0};
        ds.records[i].targets = {0.0, 0.0};
    }
    auto model = identity_model(ds.schema, 1);
    ObliviousTree tree;
    tree.splits = {{0, 0.5}};
    tree.leaf_values = {{2.0}, {6.0}};
    tree.leaf_weights = {3.0, 1.0};
    model.trees.push_back(tree);

    auto attribution = tree_shap(model, ds);
    const double base = (3.0 * 2.0 + 1.0 * 6.0) / 4.0;
    CHECK(attribution.base[0] == doctest::Approx(base).epsilon(1e-12));
    for (std::size_t i = 0; i < 4; ++i) {
        const double pred = i < 2 ? 2.0 : 6.0;
        CHECK(attribution.phi[i][0][0] == doctest::Approx(pred - base).epsilon(1e-12));
        CHECK(attribution.phi[i][1][0] == 0.0);
        CHECK(attribution.phi[i][2][0] == 0.0);
    }
}

TEST_CASE("attributions match the exhaustive subset oracle") {
    auto ds = numeric_dataset(4, 240, 21);
    TrainConfig config;
    config.n_estimators = 60;
    config.max_depth = 4;
    config.learning_rate = 0.15;
    config.seed = 2;
    auto model = train(ds, config);
    REQUIRE_FALSE(model.trees.empty());

    auto attribution = tree_shap(model, ds);
    const auto columns = transform(model.encoder, ds);
    for (std::size_t i = 0; i < ds.size(); i += 12)
        for (std::size_t d = 0; d < 2; ++d) {
            const auto oracle = brute_force_phi(model, columns, i, d, 4);
            for (std::size_t f = 0; f < 4; ++f)
                CHECK(attribution.phi[i][f][d] == doctest::Approx(oracle[f]).epsilon(1e-6));
        }
    check_local_accuracy(model, ds, 1e-8);
}

TEST_CASE("repeated features along a path stay consistent with the oracle") {
    auto ds = numeric_dataset(2, 150, 33);
    TrainConfig config;
    config.n_estimators = 40;
    config.max_depth = 4;
    config.seed = 4;
    auto model = train(ds, config);

    bool repeated = false;
    for (const auto& tree : model.trees) {
        std::vector<std::size_t> used;
        for (const auto& split : tree.splits) used.push_back(split.feature);
        std::sort(used.begin(), used.end());
        if (std::adjacent_find(used.begin(), used.end()) != used.end()) repeated = true;
    }
    CHECK(repeated);

    auto attribution = tree_shap(model, ds);
    const auto columns = transform(model.encoder, ds);
    for (std::size_t i = 0; i < ds.size(); i += 10) {
        const auto oracle = brute_force_phi(model, columns, i, 0, 2);
        for (std::size_t f = 0; f < 2; ++f)
            CHECK(attribution.phi[i][f][0] == doctest::Approx(oracle[f]).epsilon(1e-6));
    }
}

TEST_CASE("local accuracy holds on a trained two-target ensemble") {
    auto ds = numeric_dataset(5, 300, 77);
    TrainConfig config;
    config.n_estimators = 120;
    config.max_depth = 5;
    config.seed = 6;
    auto model = train(ds, config);
    check_local_accuracy(model, ds, 1e-8);
}

TEST_CASE("mirrored trees attribute equally to interchangeable features") {
    auto ds = numeric_dataset(2, 6, 41);
    for (auto& rec : ds.records) rec.feature_num[1] = rec.feature_num[0];
    auto model = identity_model(ds.schema, 1);

    ObliviousTree first;
    first.splits = {{0, 0.0}};
    first.leaf_values = {{-1.5}, {2.5}};
    first.leaf_weights = {2.0, 2.0};
    ObliviousTree second = first;
    second.splits = {{1, 0.0}};
    model.trees = {first, second};

    auto attribution = tree_shap(model, ds);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(std::abs(attribution.phi[i][0][0] - attribution.phi[i][1][0]) <= 1e-8);

    ObliviousTree both;
    both.splits = {{0, 0.0}, {1, 0.0}};
    both.leaf_values = {{1.0}, {-2.0}, {-2.0}, {4.0}};
    both.leaf_weights = {1.0, 1.0, 1.0, 1.0};
    model.trees = {both};
    attribution = tree_shap(model, ds);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(std::abs(attribution.phi[i][0][0] - attribution.phi[i][1][0]) <= 1e-8);
}

TEST_CASE("features outside every tree receive exactly zero") {
    auto ds = numeric_dataset(3, 30, 55);
    auto model = identity_model(ds.schema, 1);
    ObliviousTree tree;
    tree.splits = {{0, 0.1}, {1, -0.5}};
    tree.leaf_values = {{1.0}, {2.0}, {3.0}, {4.0}};
    tree.leaf_weights = {1.0, 2.0, 3.0, 4.0};
    model.trees = {tree};

    auto attribution = tree_shap(model, ds);
    for (const auto& record : attribution.phi) CHECK(record[2][0] == 0.0);
}

TEST_CASE("missing covers are rejected") {
    auto ds = numeric_dataset(3, 20, 14);
    TrainConfig config;
    config.n_estimators = 3;
    config.max_depth = 2;
    auto model = train(ds, config);
    model.trees[1].leaf_weights.clear();
    CHECK_THROWS_WITH_AS(tree_shap(model, ds), "covers required for attribution",
                         std::invalid_argument);
}

TEST_CASE("schema mismatches are rejected") {
    auto ds = numeric_dataset(3, 20, 15);
    TrainConfig config;
    config.n_estimators = 2;
    auto model = train(ds, config);
    auto other = numeric_dataset(4, 5, 16);
    CHECK_THROWS_AS(tree_shap(model, other), std::invalid_argument);
}

TEST_CASE("all-zero attributions rank alphabetically at zero") {
    Dataset ds = numeric_dataset(3, 10, 23);
    ds.schema.features[0].name = "beta";
    ds.schema.features[1].name = "alpha";
    ds.schema.features[2].name = "gamma";
    TrainConfig config;
    config.n_estimators = 0;
    auto model = train(ds, config);

    auto attribution = tree_shap(model, ds);
    auto ranking = global_importance(attribution, 0);
    REQUIRE(ranking.size() == 3);
    CHECK(ranking[0].first == "alpha");
    CHECK(ranking[1].first == "beta");
    CHECK(ranking[2].first == "gamma");
    for (const auto& [name, value] : ranking) CHECK(value == 0.0);
}

TEST_CASE("rating and maturity dominate the synthetic spread attribution") {
    GeneratorConfig gen;
    gen.n_bonds = 900;
    gen.seed = 31;
    auto universe = generate_universe(gen);
    auto generated = generate_targets(universe, gen);

    TrainConfig config;
    config.n_estimators = 150;
    config.max_depth = 6;
    config.learning_rate = 0.1;
    config.seed = 3;
    auto model = train(generated.dataset, config);

    std::vector<std::size_t> sample;
    for (std::size_t i = 0; i < generated.dataset.size(); i += 3) sample.push_back(i);
    auto attribution = tree_shap(model, take(generated.dataset, sample));
    auto ranking = global_importance(attribution, 0);

    std::vector<std::string> top3;
    for (std::size_t r = 0; r < 3; ++r) top3.push_back(ranking[r].first);
    CHECK(std::find(top3.begin(), top3.end(), "rating") != top3.end());
    CHECK(std::find(top3.begin(), top3.end(), "days_to_maturity") != top3.end());
}

TEST_CASE("attribution tables export cleanly") {
    auto ds = numeric_dataset(2, 5, 61);
    TrainConfig config;
    config.n_estimators = 4;
    config.max_depth = 2;
    auto model = train(ds, config);
    auto attribution = tree_shap(model, ds);

    write_attribution_csv("phi.csv", attribution);
    auto table = csv::read_file("phi.csv");
    std::remove("phi.csv");
    REQUIRE(table.header ==
            std::vector<std::string>{"record_id", "feature", "target_dim", "phi"});
    CHECK(table.rows.size() == 5 * 2 * 2);
    CHECK(table.rows[0][0] == "b0");
    CHECK(table.rows[0][1] == "x0");
    CHECK(table.rows[0][2] == "oas");

    write_importance_json("imp.json", attribution);
    std::ifstream in("imp.json");
    std::stringstream body;
    body << in.rdbuf();
    in.close();
    std::remove("imp.json");
    CHECK(body.str().find("relval-importance") != std::string::npos);
    CHECK(body.str().find("mean_abs_phi") != std::string::npos);
}
