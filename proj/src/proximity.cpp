#include "relval/proximity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relval/csv.hpp"

namespace relval {

namespace {

void check_index(const ProximityIndex& index) {
    if (index.leaves.empty()) throw std::invalid_argument("proximity index has no records");
    const std::size_t n = index.leaves[0].size();
    if (n == 0) throw std::invalid_argument("proximity index needs at least one tree");
    for (const auto& row : index.leaves)
        if (row.size() != n) throw std::invalid_argument("ragged leaf matrix");
    if (index.importances.size() != n)
        throw std::invalid_argument("importance count does not match tree count");
    if (index.ids.size() != index.leaves.size())
        throw std::invalid_argument("id count does not match record count");
}

void check_position(const ProximityIndex& index, std::size_t i) {
    if (i >= index.records()) throw std::out_of_range("record position out of range");
}

double weighted_cooccurrence(const ProximityIndex& index, std::size_t i, std::size_t j,
                             bool weighted) {
    check_position(index, i);
    check_position(index, j);
    const auto& vi = index.leaves[i];
    const auto& vj = index.leaves[j];
    double acc = 0.0;
    for (std::size_t t = 0; t < vi.size(); ++t)
        if (vi[t] == vj[t]) acc += weighted ? index.importances[t] : 1.0;
    return acc / static_cast<double>(vi.size());
}

}  // namespace

std::vector<double> tree_importances(const std::vector<double>& error_trace) {
    if (error_trace.size() < 2)
        throw std::invalid_argument("error trace needs at least two entries");
    const std::size_t n = error_trace.size() - 1;
    std::vector<double> deltas(n, 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        deltas[t] = std::abs(error_trace[t] - error_trace[t + 1]);
        total += deltas[t];
    }
    if (total == 0.0) {
        std::fill(deltas.begin(), deltas.end(), 1.0 / static_cast<double>(n));
        return deltas;
    }
    for (double& d : deltas) d /= total;
    return deltas;
}

ProximityIndex boosted_index(std::vector<std::vector<std::uint32_t>> leaves,
                             std::vector<std::string> ids,
                             const std::vector<double>& error_trace) {
    ProximityIndex index;
    index.leaves = std::move(leaves);
    index.ids = std::move(ids);
    index.importances = tree_importances(error_trace);
    index.kind = ProximityKind::kBoosted;
    check_index(index);
    return index;
}

ProximityIndex forest_index(std::vector<std::vector<std::uint32_t>> leaves,
                            std::vector<std::string> ids) {
    ProximityIndex index;
    index.leaves = std::move(leaves);
    index.ids = std::move(ids);
    const std::size_t n = index.leaves.empty() ? 0 : index.leaves[0].size();
    index.importances.assign(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
    index.kind = ProximityKind::kForest;
    check_index(index);
    return index;
}

double gbm_proximity(const ProximityIndex& index, std::size_t i, std::size_t j) {
    return weighted_cooccurrence(index, i, j, true);
}

double rf_proximity(const ProximityIndex& index, std::size_t i, std::size_t j) {
    return weighted_cooccurrence(index, i, j, false);
}

double proximity(const ProximityIndex& index, std::size_t i, std::size_t j) {
    return index.kind == ProximityKind::kForest ? rf_proximity(index, i, j)
                                                : gbm_proximity(index, i, j);
}

KnnResult top_neighbors(const ProximityIndex& index,
                        const std::vector<std::size_t>& candidates,
                        const std::vector<double>& row, std::size_t k) {
    if (k == 0) throw std::invalid_argument("k must be positive");
    if (candidates.empty()) throw std::invalid_argument("candidate set is empty");
    if (row.size() != candidates.size())
        throw std::invalid_argument("proximity row does not match candidate count");

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (row[a] != row[b]) return row[a] > row[b];
        return index.ids[candidates[a]] < index.ids[candidates[b]];
    });

    KnnResult result;
    result.short_count = candidates.size() < k;
    const std::size_t take = std::min(k, candidates.size());
    result.neighbors.reserve(take);
    for (std::size_t c = 0; c < take; ++c)
        result.neighbors.push_back({candidates[order[c]], row[order[c]]});
    return result;
}

KnnResult knn_query(const ProximityIndex& index, std::size_t i, std::size_t k,
                    const std::vector<std::size_t>& candidates) {
    check_position(index, i);
    std::vector<double> row(candidates.size(), 0.0);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (candidates[c] == i)
            throw std::invalid_argument("query must not appear among its own candidates");
        row[c] = proximity(index, i, candidates[c]);
    }
    return top_neighbors(index, candidates, row, k);
}

std::vector<std::vector<double>> pairwise_proximity(const ProximityIndex& index,
                                                    const std::vector<std::size_t>& members) {
    check_index(index);
    for (std::size_t m : members) check_position(index, m);

    const std::size_t m = members.size();
    const std::size_t n = index.trees();
    const bool weighted = index.kind == ProximityKind::kBoosted;
    std::vector<std::vector<double>> matrix(m, std::vector<double>(m, 0.0));

    std::vector<std::pair<std::uint32_t, std::uint32_t>> slots(m);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t s = 0; s < m; ++s)
            slots[s] = {index.leaves[members[s]][t], static_cast<std::uint32_t>(s)};
        std::sort(slots.begin(), slots.end());
        const double vote = weighted ? index.importances[t] : 1.0;
        for (std::size_t lo = 0; lo < m;) {
            std::size_t hi = lo + 1;
            while (hi < m && slots[hi].first == slots[lo].first) ++hi;
            for (std::size_t a = lo; a < hi; ++a)
                for (std::size_t b = a + 1; b < hi; ++b) {
                    matrix[slots[a].second][slots[b].second] += vote;
                    matrix[slots[b].second][slots[a].second] += vote;
                }
            lo = hi;
        }
    }

    // Divide rather than multiply by a reciprocal so entries match the
    // pairwise formula bit for bit.
    const double dn = static_cast<double>(n);
    double diag = 0.0;
    if (weighted)
        for (double d : index.importances) diag += d;
    else
        diag = dn;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) matrix[a][b] /= dn;
        matrix[a][a] = diag / dn;
    }
    return matrix;
}

void write_neighbor_table(const std::string& path, const ProximityIndex& index,
                          const std::vector<std::size_t>& queries,
                          const std::vector<std::size_t>& candidates, std::size_t k,
                          const std::string& provenance) {
    csv::Writer out(path);
    if (!provenance.empty()) out.comment(provenance);
    out.row({"query_id", "neighbor_id", "proximity", "rank"});
    std::vector<std::size_t> pool;
    pool.reserve(candidates.size());
    for (std::size_t q : queries) {
        check_position(index, q);
        pool.clear();
        for (std::size_t c : candidates)
            if (c != q) pool.push_back(c);
        if (pool.empty()) continue;
        const auto result = knn_query(index, q, k, pool);
        for (std::size_t r = 0; r < result.neighbors.size(); ++r)
            out.row({index.ids[q], index.ids[result.neighbors[r].position],
                     csv::format_double(result.neighbors[r].proximity),
                     std::to_string(r + 1)});
    }
}

}  // namespace relval
