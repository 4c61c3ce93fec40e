#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "relval/baselines.hpp"
#include "relval/data_model.hpp"
#include "relval/encoding.hpp"
#include "relval/metrics.hpp"
#include "relval/rng.hpp"
#include "relval/synthgen.hpp"

using namespace relval;

namespace {

using Matrix = std::vector<std::vector<double>>;

// Solves A x = b by Gaussian elimination with partial pivoting; the fixtures
// are tiny and well conditioned, so this is oracle-grade.
std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
    const std::size_t p = b.size();
    for (std::size_t k = 0; k < p; ++k) {
        std::size_t pivot = k;
        for (std::size_t r = k + 1; r < p; ++r)
            if (std::abs(a[r][k]) > std::abs(a[pivot][k])) pivot = r;
        std::swap(a[k], a[pivot]);
        std::swap(b[k], b[pivot]);
        for (std::size_t r = k + 1; r < p; ++r) {
            const double m = a[r][k] / a[k][k];
            for (std::size_t c = k; c < p; ++c) a[r][c] -= m * a[k][c];
            b[r] -= m * b[k];
        }
    }
    std::vector<double> x(p, 0.0);
    for (std::size_t k = p; k-- > 0;) {
        double acc = b[k];
        for (std::size_t c = k + 1; c < p; ++c) acc -= a[k][c] * x[c];
        x[k] = acc / a[k][k];
    }
    return x;
}

// Standardizes columns (population std) and centers y, then solves
// (X'X/n + penalty I) beta = X'y/n; penalty 0 gives least squares.
std::vector<double> closed_form_net(const Matrix& columns, const std::vector<double>& y,
                                    double penalty) {
    const std::size_t p = columns.size(), n = y.size();
    const double dn = static_cast<double>(n);
    Matrix x(p, std::vector<double>(n, 0.0));
    for (std::size_t f = 0; f < p; ++f) {
        double mean = 0.0;
        for (double v : columns[f]) mean += v;
        mean /= dn;
        double var = 0.0;
        for (double v : columns[f]) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / dn);
        for (std::size_t i = 0; i < n; ++i) x[f][i] = (columns[f][i] - mean) / sd;
    }
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= dn;

    Matrix gram(p, std::vector<double>(p, 0.0));
    std::vector<double> rhs(p, 0.0);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += x[a][i] * x[b][i];
            gram[a][b] = acc / dn;
        }
        gram[a][a] += penalty;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += x[a][i] * (y[i] - y_mean);
        rhs[a] = acc / dn;
    }
    return solve_linear(std::move(gram), std::move(rhs));
}

Matrix random_matrix(std::size_t p, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix columns(p, std::vector<double>(n, 0.0));
    for (auto& col : columns)
        for (auto& v : col) v = rng.uniform(-3.0, 3.0);
    return columns;
}

std::vector<double> net_targets(const Matrix& columns, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> y(columns[0].size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        double acc = 1.5;
        for (std::size_t f = 0; f < columns.size(); ++f)
            acc += (0.3 * static_cast<double>(f) - 0.8) * columns[f][i];
        y[i] = acc + 0.2 * rng.normal();
    }
    return y;
}

double net_objective(const ElasticNetModel& model, const Matrix& columns,
                     const std::vector<double>& y, const NetConfig& config) {
    const double dn = static_cast<double>(y.size());
    double sse = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - model.predict_row(columns, i);
        sse += d * d;
    }
    double l1 = 0.0, l2 = 0.0;
    for (double c : model.coefficients) {
        l1 += std::abs(c);
        l2 += c * c;
    }
    return sse / (2.0 * dn) +
           config.alpha * (config.l1_ratio * l1 + 0.5 * (1.0 - config.l1_ratio) * l2);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    return body.str();
}

struct EncodedBenchmark {
    Matrix train_x, test_x;
    std::vector<double> train_y, test_y;
};

// Noiseless synthetic bonds encoded the same way the boosted model sees them,
// on the first target; shared by the tree-vs-forest-vs-net comparisons.
EncodedBenchmark make_benchmark() {
    GeneratorConfig config;
    config.n_bonds = 30000;
    config.seed = 99;
    auto universe = generate_universe(config);
    auto generated = generate_targets(universe, config);

    auto split = split_dataset(generated.dataset, 7);
    auto train = take(generated.dataset, split.train);
    auto test = take(generated.dataset, split.test);

    auto encoding = fit_ordered_encoding(train, 0, derive_seed(11, rng_tag::kEncoding));
    EncodedBenchmark bench;
    bench.train_x = encoding.columns;
    bench.test_x = transform(encoding.encoder, test);
    for (const auto& rec : train.records) bench.train_y.push_back(rec.targets[0]);
    for (const auto& rec : test.records) bench.test_y.push_back(rec.targets[0]);
    return bench;
}

double test_r2(const Matrix& test_x, const std::vector<double>& test_y,
               const std::vector<double>& pred) {
    auto metrics = evaluate(pred, test_y);
    REQUIRE(metrics.r2.has_value());
    (void)test_x;
    return *metrics.r2;
}

}  // namespace

TEST_CASE("constant target collapses to a single leaf") {
    Matrix columns{{1.0, 2.0, 3.0, 4.0}};
    std::vector<double> y(4, 7.25);
    auto model = train_decision_tree(columns, y, {}, TreeConfig{});
    REQUIRE(model.nodes.size() == 1);
    CHECK(model.nodes[0].feature == -1);
    CHECK(model.nodes[0].value == doctest::Approx(7.25));
    CHECK(model.nodes[0].cover == doctest::Approx(4.0));
}

TEST_CASE("xor layout is fit exactly at depth two") {
    Matrix columns{{0.0, 0.0, 1.0, 1.0}, {0.0, 1.0, 0.0, 1.0}};
    std::vector<double> y{0.0, 1.0, 1.0, 0.0};
    TreeConfig config;
    config.max_depth = 2;
    auto model = train_decision_tree(columns, y, {}, config);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(model.predict_row(columns, i) == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("depth zero predicts the global mean everywhere") {
    Matrix columns{{1.0, 2.0, 3.0, 4.0}};
    std::vector<double> y{1.0, 2.0, 3.0, 10.0};
    TreeConfig config;
    config.max_depth = 0;
    auto model = train_decision_tree(columns, y, {}, config);
    REQUIRE(model.nodes.size() == 1);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(model.predict_row(columns, i) == doctest::Approx(4.0));
}

TEST_CASE("weighted leaf minimum vetoes splits that starve a child") {
    Matrix columns{{1.0, 2.0, 3.0, 4.0}};
    std::vector<double> y{0.0, 0.0, 1.0, 1.0};
    TreeConfig config;
    config.min_samples_leaf = 3.0;
    auto model = train_decision_tree(columns, y, {}, config);
    REQUIRE(model.nodes.size() == 1);
    CHECK(model.nodes[0].value == doctest::Approx(0.5));
}

TEST_CASE("leaf index matches the traversal of predict") {
    Matrix columns{{0.0, 0.0, 1.0, 1.0}, {0.0, 1.0, 0.0, 1.0}};
    std::vector<double> y{0.0, 1.0, 1.0, 0.0};
    TreeConfig config;
    config.max_depth = 2;
    auto model = train_decision_tree(columns, y, {}, config);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto leaf = model.leaf_index(columns, i);
        CHECK(model.nodes[leaf].feature == -1);
        CHECK(model.nodes[leaf].value == model.predict_row(columns, i));
    }
}

TEST_CASE("empty training data is rejected") {
    CHECK_THROWS_AS(train_decision_tree({}, {}, {}, TreeConfig{}), std::invalid_argument);
    CHECK_THROWS_AS(train_random_forest({}, {}, {}, ForestConfig{}), std::invalid_argument);
    CHECK_THROWS_AS(train_elastic_net({}, {}, NetConfig{}), std::invalid_argument);
    ForestConfig empty_forest;
    empty_forest.n_estimators = 0;
    CHECK_THROWS_AS(train_random_forest({{1.0, 2.0}}, {0.0, 1.0}, {}, empty_forest),
                    std::invalid_argument);
}

TEST_CASE("one tree without bootstrap degenerates to the plain decision tree") {
    Matrix columns{{0.0, 1.0, 2.0, 3.0, 4.0, 5.0}, {5.0, 3.0, 8.0, 1.0, 9.0, 2.0}};
    std::vector<double> y{0.0, 1.0, 4.0, 9.0, 16.0, 25.0};

    TreeConfig tree_config;
    tree_config.max_features = 1.0;
    auto tree = train_decision_tree(columns, y, {}, tree_config);

    ForestConfig forest_config;
    forest_config.n_estimators = 1;
    forest_config.bootstrap = false;
    forest_config.max_features = 1.0;
    auto forest = train_random_forest(columns, y, {}, forest_config);

    REQUIRE(forest.trees.size() == 1);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(forest.predict_row(columns, i) == tree.predict_row(columns, i));
}

TEST_CASE("forest training is deterministic per seed") {
    auto columns = random_matrix(4, 60, 314);
    std::vector<double> y(60, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = columns[0][i] * columns[1][i] + 0.5 * columns[2][i];

    ForestConfig config;
    config.n_estimators = 12;
    config.seed = 42;
    auto a = train_random_forest(columns, y, {}, config);
    auto b = train_random_forest(columns, y, {}, config);

    save_random_forest(a, "rf_a.json");
    save_random_forest(b, "rf_b.json");
    CHECK(slurp("rf_a.json") == slurp("rf_b.json"));
    std::remove("rf_a.json");
    std::remove("rf_b.json");

    config.seed = 43;
    auto c = train_random_forest(columns, y, {}, config);
    bool any_differs = false;
    for (std::size_t i = 0; i < y.size() && !any_differs; ++i)
        any_differs = c.predict_row(columns, i) != a.predict_row(columns, i);
    CHECK(any_differs);
}

TEST_CASE("forest prediction is the arithmetic mean of its trees") {
    auto columns = random_matrix(3, 40, 2718);
    std::vector<double> y(40, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = columns[0][i] + columns[1][i] * columns[2][i];

    ForestConfig config;
    config.n_estimators = 7;
    config.seed = 5;
    auto forest = train_random_forest(columns, y, {}, config);
    REQUIRE(forest.trees.size() == 7);
    for (std::size_t i = 0; i < y.size(); i += 5) {
        double acc = 0.0;
        for (const auto& tree : forest.trees) acc += tree.predict_row(columns, i);
        CHECK(forest.predict_row(columns, i) == doctest::Approx(acc / 7.0).epsilon(1e-12));
    }
}

TEST_CASE("forest leaves line up with per-tree leaf indices") {
    auto columns = random_matrix(3, 30, 11);
    std::vector<double> y(30, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = columns[0][i] * columns[0][i];

    ForestConfig config;
    config.n_estimators = 4;
    auto forest = train_random_forest(columns, y, {}, config);
    auto leaves = forest_leaves(forest, columns);
    REQUIRE(leaves.size() == 30);
    for (std::size_t i = 0; i < leaves.size(); i += 7)
        for (std::size_t t = 0; t < forest.trees.size(); ++t)
            CHECK(leaves[i][t] == forest.trees[t].leaf_index(columns, i));
}

TEST_CASE("forest tracks a deep single tree on noiseless synthetic bonds") {
    auto bench = make_benchmark();

    TreeConfig tree_config;
    tree_config.max_depth = 14;
    auto tree = train_decision_tree(bench.train_x, bench.train_y, {}, tree_config);

    ForestConfig forest_config;
    forest_config.n_estimators = 40;
    forest_config.max_depth = 14;
    forest_config.max_features = 0.6;
    forest_config.seed = 3;
    auto forest = train_random_forest(bench.train_x, bench.train_y, {}, forest_config);

    NetConfig net_config;
    net_config.alpha = 1e-4;
    auto net = train_elastic_net(bench.train_x, bench.train_y, net_config);

    const std::size_t n = bench.test_y.size();
    std::vector<double> tree_pred(n), forest_pred(n), net_pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        tree_pred[i] = tree.predict_row(bench.test_x, i);
        forest_pred[i] = forest.predict_row(bench.test_x, i);
        net_pred[i] = net.predict_row(bench.test_x, i);
    }
    const double tree_r2 = test_r2(bench.test_x, bench.test_y, tree_pred);
    const double forest_r2 = test_r2(bench.test_x, bench.test_y, forest_pred);
    const double net_r2 = test_r2(bench.test_x, bench.test_y, net_pred);

    INFO("tree_r2=", tree_r2, " forest_r2=", forest_r2, " net_r2=", net_r2);
    CHECK(std::abs(forest_r2 - tree_r2) <= 0.05);
    CHECK(tree_r2 > net_r2);
    CHECK(forest_r2 > net_r2);
}

TEST_CASE("zero penalty reproduces normal-equation least squares") {
    auto columns = random_matrix(8, 50, 1234);
    auto y = net_targets(columns, 77);

    NetConfig config;
    config.alpha = 0.0;
    config.max_iter = 5000;
    config.tol = 1e-12;
    auto model = train_elastic_net(columns, y, config);
    CHECK(model.converged);

    auto oracle = closed_form_net(columns, y, 0.0);
    REQUIRE(model.coefficients.size() == oracle.size());
    for (std::size_t f = 0; f < oracle.size(); ++f)
        CHECK(model.coefficients[f] == doctest::Approx(oracle[f]).epsilon(1e-6));
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    CHECK(model.intercept == doctest::Approx(y_mean / static_cast<double>(y.size())));
}

TEST_CASE("pure l2 penalty reproduces closed-form ridge") {
    auto columns = random_matrix(8, 50, 4321);
    auto y = net_targets(columns, 88);

    NetConfig config;
    config.alpha = 0.7;
    config.l1_ratio = 0.0;
    config.max_iter = 5000;
    config.tol = 1e-12;
    auto model = train_elastic_net(columns, y, config);
    CHECK(model.converged);

    auto oracle = closed_form_net(columns, y, config.alpha);
    for (std::size_t f = 0; f < oracle.size(); ++f)
        CHECK(model.coefficients[f] == doctest::Approx(oracle[f]).epsilon(1e-6));
}

TEST_CASE("overwhelming penalty zeroes every coefficient") {
    auto columns = random_matrix(5, 30, 555);
    auto y = net_targets(columns, 66);

    NetConfig config;
    config.alpha = 1e9;
    auto model = train_elastic_net(columns, y, config);
    CHECK(model.converged);
    for (double c : model.coefficients) CHECK(c == 0.0);
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    CHECK(model.intercept == doctest::Approx(y_mean / static_cast<double>(y.size())));
}

TEST_CASE("coordinate descent objective never increases across sweeps") {
    auto columns = random_matrix(6, 40, 999);
    auto y = net_targets(columns, 33);

    NetConfig config;
    config.alpha = 0.15;
    config.l1_ratio = 0.4;
    config.tol = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t sweeps = 1; sweeps <= 10; ++sweeps) {
        config.max_iter = sweeps;
        auto model = train_elastic_net(columns, y, config);
        const double obj = net_objective(model, columns, y, config);
        CHECK(obj <= prev + 1e-12);
        prev = obj;
    }
}

TEST_CASE("non-convergence is reported, not thrown") {
    auto columns = random_matrix(6, 40, 321);
    auto y = net_targets(columns, 12);
    NetConfig config;
    config.alpha = 0.05;
    config.max_iter = 1;
    config.tol = 1e-15;
    auto model = train_elastic_net(columns, y, config);
    CHECK_FALSE(model.converged);
}

TEST_CASE("invalid penalty settings are rejected") {
    Matrix columns{{1.0, 2.0, 3.0}};
    std::vector<double> y{1.0, 2.0, 3.0};
    NetConfig config;
    config.alpha = -1.0;
    CHECK_THROWS_AS(train_elastic_net(columns, y, config), std::invalid_argument);
    config.alpha = 1.0;
    config.l1_ratio = 1.5;
    CHECK_THROWS_AS(train_elastic_net(columns, y, config), std::invalid_argument);
}

TEST_CASE("baseline models survive persistence round trips") {
    auto columns = random_matrix(4, 50, 31);
    std::vector<double> y(50, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = columns[0][i] * columns[1][i] - columns[3][i];

    auto tree = train_decision_tree(columns, y, {}, TreeConfig{});
    save_decision_tree(tree, "dt_rt.json");
    auto tree_back = load_decision_tree("dt_rt.json");
    std::remove("dt_rt.json");
    REQUIRE(tree_back.nodes.size() == tree.nodes.size());
    for (std::size_t i = 0; i < y.size(); i += 9)
        CHECK(tree_back.predict_row(columns, i) == tree.predict_row(columns, i));

    ForestConfig forest_config;
    forest_config.n_estimators = 5;
    auto forest = train_random_forest(columns, y, {}, forest_config);
    save_random_forest(forest, "rf_rt.json");
    auto forest_back = load_random_forest("rf_rt.json");
    std::remove("rf_rt.json");
    REQUIRE(forest_back.trees.size() == forest.trees.size());
    for (std::size_t i = 0; i < y.size(); i += 9)
        CHECK(forest_back.predict_row(columns, i) == forest.predict_row(columns, i));

    NetConfig net_config;
    net_config.alpha = 0.2;
    auto net = train_elastic_net(columns, y, net_config);
    save_elastic_net(net, "enet_rt.json");
    auto net_back = load_elastic_net("enet_rt.json");
    std::remove("enet_rt.json");
    CHECK(net_back.intercept == net.intercept);
    CHECK(net_back.coefficients == net.coefficients);
    CHECK(net_back.converged == net.converged);
    for (std::size_t i = 0; i < y.size(); i += 9)
        CHECK(net_back.predict_row(columns, i) == net.predict_row(columns, i));

    std::ifstream probe("dt_rt.json");
    CHECK_FALSE(probe.good());
    CHECK_THROWS_AS(load_decision_tree("missing_model.json"), std::runtime_error);
}
