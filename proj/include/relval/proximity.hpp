#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace relval {

enum class ProximityKind { kBoosted, kForest };

/// Leaf co-occurrence index over a trained ensemble. Rows are records,
/// columns are trees; importances weight each tree's vote (uniform for
/// forests). Immutable after build, so queries are pure.
struct ProximityIndex {
    std::vector<std::vector<std::uint32_t>> leaves;  // [record][tree]
    std::vector<double> importances;                 // per tree, sums to 1
    std::vector<std::string> ids;                    // per record
    ProximityKind kind = ProximityKind::kBoosted;

    std::size_t records() const { return leaves.size(); }
    std::size_t trees() const { return leaves.empty() ? 0 : leaves[0].size(); }
};

/// Per-tree importance from a training error trace E(0..N):
/// delta_t = |E(t-1) - E(t)| / sum of all such magnitudes. A zero-progress
/// trace falls back to uniform 1/N so the weights stay defined.
std::vector<double> tree_importances(const std::vector<double>& error_trace);

ProximityIndex boosted_index(std::vector<std::vector<std::uint32_t>> leaves,
                             std::vector<std::string> ids,
                             const std::vector<double>& error_trace);

ProximityIndex forest_index(std::vector<std::vector<std::uint32_t>> leaves,
                            std::vector<std::string> ids);

/// Importance-weighted co-occurrence, P(i,j) = (1/N) sum_t delta_t [v_t(i)=v_t(j)].
/// The 1/N prefactor keeps the published form; rankings are scale invariant.
double gbm_proximity(const ProximityIndex& index, std::size_t i, std::size_t j);

/// Plain co-occurrence share, S(i,j) = (1/N) sum_t [v_t(i)=v_t(j)], in [0,1].
double rf_proximity(const ProximityIndex& index, std::size_t i, std::size_t j);

/// Kind-dispatched: boosted indexes score with gbm_proximity, forests with
/// rf_proximity.
double proximity(const ProximityIndex& index, std::size_t i, std::size_t j);

struct Neighbor {
    std::size_t position = 0;
    double proximity = 0.0;
};

struct KnnResult {
    std::vector<Neighbor> neighbors;  // proximity descending, id ascending on ties
    bool short_count = false;         // fewer candidates than requested
};

/// Top-k of a precomputed proximity row (row[c] scores candidates[c]).
KnnResult top_neighbors(const ProximityIndex& index,
                        const std::vector<std::size_t>& candidates,
                        const std::vector<double>& row, std::size_t k);

/// Top-k candidates by proximity to record i. The query must not appear in
/// its own candidate set.
KnnResult knn_query(const ProximityIndex& index, std::size_t i, std::size_t k,
                    const std::vector<std::size_t>& candidates);

/// Dense pairwise proximity among `members`, bucketed by leaf per tree so the
/// cost scales with co-located pairs rather than members squared.
std::vector<std::vector<double>> pairwise_proximity(const ProximityIndex& index,
                                                    const std::vector<std::size_t>& members);

/// CSV of the top-k neighbors for every query (query_id, neighbor_id,
/// proximity, rank). A query occurring among the candidates is skipped for
/// its own row set. A non-empty provenance string becomes a leading comment.
void write_neighbor_table(const std::string& path, const ProximityIndex& index,
                          const std::vector<std::size_t>& queries,
                          const std::vector<std::size_t>& candidates, std::size_t k,
                          const std::string& provenance = "");

}  // namespace relval
