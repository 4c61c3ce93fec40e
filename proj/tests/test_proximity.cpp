#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "relval/csv.hpp"
#include "relval/proximity.hpp"
#include "relval/rng.hpp"

using namespace relval;

namespace {

using LeafMatrix = std::vector<std::vector<std::uint32_t>>;

std::vector<std::string> label(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("b" + std::to_string(i));
    return ids;
}

// Hand-check oracle: importance-weighted (or plain) leaf agreement, summed
// tree by tree and divided by the tree count.
double naive_proximity(const ProximityIndex& index, std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t t = 0; t < index.trees(); ++t)
        if (index.leaves[i][t] == index.leaves[j][t])
            acc += index.kind == ProximityKind::kBoosted ? index.importances[t] : 1.0;
    return acc / static_cast<double>(index.trees());
}

ProximityIndex random_index(std::size_t records, std::size_t trees, std::uint64_t seed,
                            bool boosted) {
    Rng rng(seed);
    LeafMatrix leaves(records, std::vector<std::uint32_t>(trees, 0));
    for (auto& row : leaves)
        for (auto& leaf : row) leaf = static_cast<std::uint32_t>(rng.uniform_int(4));
    if (!boosted) return forest_index(std::move(leaves), label(records));
    std::vector<double> trace{10.0};
    for (std::size_t t = 0; t < trees; ++t) trace.push_back(trace.back() - rng.uniform01());
    return boosted_index(std::move(leaves), label(records), trace);
}

}  // namespace

TEST_CASE("tree importances follow error drops") {
    auto deltas = tree_importances({10.0, 6.0, 4.0, 3.0});
    REQUIRE(deltas.size() == 3);
    CHECK(deltas[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(deltas[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
    CHECK(deltas[2] == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("zero-progress trace falls back to uniform importances") {
    auto deltas = tree_importances({5.0, 5.0, 5.0});
    REQUIRE(deltas.size() == 2);
    CHECK(deltas[0] == doctest::Approx(0.5));
    CHECK(deltas[1] == doctest::Approx(0.5));
}

TEST_CASE("importances use magnitudes and always sum to one") {
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> trace;
        const std::size_t len = 2 + rng.uniform_int(20);
        for (std::size_t i = 0; i < len; ++i) trace.push_back(rng.uniform(-5.0, 5.0));
        auto deltas = tree_importances(trace);
        double total = 0.0;
        for (double d : deltas) {
            CHECK(d >= 0.0);
            total += d;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("a trace without any tree is rejected") {
    CHECK_THROWS_AS(tree_importances({1.0}), std::invalid_argument);
    CHECK_THROWS_AS(tree_importances({}), std::invalid_argument);
}

TEST_CASE("boosted proximity weights shared leaves by tree importance") {
    // Trace drops 5, 3, 2 out of 10, so importances are 0.5, 0.3, 0.2.
    LeafMatrix leaves{{1, 7, 4}, {1, 9, 4}, {0, 7, 0}, {1, 7, 4}, {2, 8, 9}};
    auto index = boosted_index(leaves, label(5), {10.0, 5.0, 2.0, 0.0});

    CHECK(gbm_proximity(index, 0, 1) == doctest::Approx((0.5 + 0.2) / 3.0).epsilon(1e-12));
    CHECK(gbm_proximity(index, 0, 2) == doctest::Approx(0.3 / 3.0).epsilon(1e-12));
    CHECK(gbm_proximity(index, 0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(gbm_proximity(index, 0, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(gbm_proximity(index, 0, 4) == 0.0);
    CHECK_THROWS_AS(gbm_proximity(index, 0, 9), std::out_of_range);
}

TEST_CASE("forest proximity is the plain co-occurrence share") {
    LeafMatrix leaves{{0, 1, 2, 3}, {0, 1, 2, 9}, {5, 6, 7, 8}};
    auto index = forest_index(leaves, label(3));
    CHECK(rf_proximity(index, 0, 1) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(rf_proximity(index, 0, 0) == 1.0);
    CHECK(rf_proximity(index, 0, 2) == 0.0);
    CHECK(proximity(index, 0, 1) == rf_proximity(index, 0, 1));
}

TEST_CASE("proximity is symmetric and maximal on the diagonal") {
    for (int rep = 0; rep < 100; ++rep) {
        const bool boosted = rep % 2 == 0;
        auto index = random_index(12, 6, 1000 + static_cast<std::uint64_t>(rep), boosted);
        for (std::size_t i = 0; i < index.records(); ++i) {
            const double self = proximity(index, i, i);
            for (std::size_t j = 0; j < index.records(); ++j) {
                const double p = proximity(index, i, j);
                CHECK(p == proximity(index, j, i));
                CHECK(p <= self);
                if (p == self)
                    for (std::size_t t = 0; t < index.trees(); ++t)
                        if (index.importances[t] > 0.0)
                            CHECK(index.leaves[i][t] == index.leaves[j][t]);
            }
        }
    }
}

TEST_CASE("bucketed pairwise matrix equals the naive double loop exactly") {
    for (const bool boosted : {true, false}) {
        auto index = random_index(100, 40, boosted ? 7u : 8u, boosted);
        std::vector<std::size_t> members(index.records());
        for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
        auto matrix = pairwise_proximity(index, members);
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = 0; j < members.size(); ++j)
                CHECK(matrix[i][j] == naive_proximity(index, i, j));
    }
}

TEST_CASE("pairwise matrix respects member subsets") {
    auto index = random_index(30, 10, 99, true);
    std::vector<std::size_t> members{4, 11, 17, 28};
    auto matrix = pairwise_proximity(index, members);
    REQUIRE(matrix.size() == 4);
    for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = 0; b < members.size(); ++b)
            CHECK(matrix[a][b] == naive_proximity(index, members[a], members[b]));
}

TEST_CASE("knn returns the hand-computed nearest candidate first") {
    LeafMatrix leaves{{1, 7, 4}, {1, 9, 4}, {0, 7, 0}, {1, 7, 4}};
    auto index = boosted_index(leaves, label(4), {10.0, 5.0, 2.0, 0.0});

    auto result = knn_query(index, 0, 1, {1, 2, 3});
    REQUIRE(result.neighbors.size() == 1);
    CHECK_FALSE(result.short_count);
    CHECK(result.neighbors[0].position == 3);
    CHECK(result.neighbors[0].proximity == doctest::Approx(1.0 / 3.0));

    result = knn_query(index, 0, 3, {1, 2, 3});
    REQUIRE(result.neighbors.size() == 3);
    CHECK(result.neighbors[0].position == 3);
    CHECK(result.neighbors[1].position == 1);
    CHECK(result.neighbors[2].position == 2);
}

TEST_CASE("knn flags short candidate lists and keeps id order on ties") {
    LeafMatrix leaves{{1, 1}, {1, 1}, {1, 1}, {2, 2}};
    auto index = forest_index(leaves, {"b2", "b0", "b1", "b3"});

    auto result = knn_query(index, 3, 9, {0, 1, 2});
    CHECK(result.short_count);
    REQUIRE(result.neighbors.size() == 3);
    CHECK(index.ids[result.neighbors[0].position] == "b0");
    CHECK(index.ids[result.neighbors[1].position] == "b1");
    CHECK(index.ids[result.neighbors[2].position] == "b2");
}

TEST_CASE("knn rejects malformed queries") {
    auto index = random_index(6, 4, 3, true);
    CHECK_THROWS_AS(knn_query(index, 0, 0, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(knn_query(index, 0, 1, {}), std::invalid_argument);
    CHECK_THROWS_AS(knn_query(index, 0, 1, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(knn_query(index, 42, 1, {1}), std::out_of_range);
}

TEST_CASE("rescaling importances never changes a knn ordering") {
    auto index = random_index(25, 8, 123, true);
    std::vector<std::size_t> candidates;
    for (std::size_t c = 1; c < index.records(); ++c) candidates.push_back(c);
    auto before = knn_query(index, 0, 10, candidates);

    auto scaled = index;
    for (double& d : scaled.importances) d *= 37.5;
    auto after = knn_query(scaled, 0, 10, candidates);

    REQUIRE(before.neighbors.size() == after.neighbors.size());
    for (std::size_t r = 0; r < before.neighbors.size(); ++r)
        CHECK(before.neighbors[r].position == after.neighbors[r].position);
}

TEST_CASE("index builders validate their inputs") {
    CHECK_THROWS_AS(boosted_index({}, {}, {1.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(boosted_index({{1, 2}, {1}}, label(2), {1.0, 0.5, 0.2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(boosted_index({{1, 2}}, label(3), {1.0, 0.5, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(boosted_index({{1, 2}}, label(1), {1.0, 0.5, 0.2, 0.1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(forest_index({{}}, label(1)), std::invalid_argument);
}

TEST_CASE("neighbor table lists ranked neighbors per query") {
    LeafMatrix leaves{{1, 7, 4}, {1, 9, 4}, {0, 7, 0}, {1, 7, 4}};
    auto index = boosted_index(leaves, label(4), {10.0, 5.0, 2.0, 0.0});

    write_neighbor_table("neighbors.csv", index, {0, 2}, {0, 1, 2, 3}, 2);
    auto table = csv::read_file("neighbors.csv");
    std::remove("neighbors.csv");

    REQUIRE(table.header == std::vector<std::string>{"query_id", "neighbor_id", "proximity",
                                                     "rank"});
    REQUIRE(table.rows.size() == 4);
    CHECK(table.rows[0][0] == "b0");
    CHECK(table.rows[0][1] == "b3");
    CHECK(table.rows[0][3] == "1");
    CHECK(table.rows[1][0] == "b0");
    CHECK(table.rows[1][1] == "b1");
    CHECK(table.rows[1][3] == "2");
    CHECK(table.rows[2][0] == "b2");
    CHECK(csv::parse_double(table.rows[2][2]) == doctest::Approx(0.3 / 3.0));
}
