#include "relval/valuation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>

#include "relval/csv.hpp"

namespace relval {

namespace {

std::size_t find_feature(const FeatureSchema& schema, const std::string& name,
                         FeatureKind kind) {
    const int idx = schema.feature_index(name);
    if (idx < 0 || schema.features[static_cast<std::size_t>(idx)].kind != kind)
        throw std::invalid_argument("dataset lacks feature '" + name + "'");
    return static_cast<std::size_t>(idx);
}

void sort_entries(std::vector<RankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    for (std::size_t r = 0; r < entries.size(); ++r) entries[r].rank = r + 1;
}

RankedList cohort_skeleton(RankMethod method, std::size_t k, const Dataset& snapshot,
                           const GenericGroup& group, bool& handled) {
    RankedList list;
    list.method = method;
    list.k = k;
    handled = true;
    if (k == 0) throw std::invalid_argument("cohort size k must be positive");
    if (group.members.empty()) return list;
    if (group.members.size() == 1) {
        const auto& rec = snapshot.records[group.members[0]];
        list.entries.push_back({rec.id, group.members[0], 1, 0.0, 0.0});
        list.degenerate = true;
        return list;
    }
    list.short_cohort = k > group.members.size() - 1;
    handled = false;
    return list;
}

RankedList rank_cohort_entries(RankedList list, const Dataset& snapshot,
                               const GenericGroup& group,
                               const std::vector<double>& relative_values) {
    for (std::size_t s = 0; s < group.members.size(); ++s) {
        const std::size_t pos = group.members[s];
        list.entries.push_back(
            {snapshot.records[pos].id, pos, 0, relative_values[s], relative_values[s]});
    }
    sort_entries(list.entries);
    return list;
}

}  // namespace

std::string maturity_bucket(double days_to_maturity) {
    if (!(days_to_maturity > 0.0))
        throw std::invalid_argument("days to maturity must be positive");
    const double years = days_to_maturity / 365.25;
    if (years > 15.0) return "Y15PLUS";
    if (years > 10.0) return "Y10_15";
    const double n = std::max(1.0, std::ceil(years));
    return "Y" + std::to_string(static_cast<int>(n));
}

std::size_t bucket_rank(const std::string& bucket) {
    if (bucket == "Y10_15") return 11;
    if (bucket == "Y15PLUS") return 12;
    if (bucket.size() > 1 && bucket[0] == 'Y') {
        const int n = std::atoi(bucket.c_str() + 1);
        if (n >= 1 && n <= 10) return static_cast<std::size_t>(n);
    }
    throw std::invalid_argument("unknown maturity bucket '" + bucket + "'");
}

bool operator==(const GroupKey& a, const GroupKey& b) {
    return a.state == b.state && a.bucket == b.bucket;
}

bool operator<(const GroupKey& a, const GroupKey& b) {
    if (a.state != b.state) return a.state < b.state;
    return bucket_rank(a.bucket) < bucket_rank(b.bucket);
}

GroupKey assign_generic_group(const Dataset& snapshot, std::size_t position) {
    if (position >= snapshot.size()) throw std::out_of_range("record position out of range");
    const std::size_t state = find_feature(snapshot.schema, "state", FeatureKind::Categorical);
    const std::size_t maturity =
        find_feature(snapshot.schema, "days_to_maturity", FeatureKind::Numerical);
    const auto& rec = snapshot.records[position];
    return {rec.feature_cat[state], maturity_bucket(rec.feature_num[maturity])};
}

std::vector<GenericGroup> build_generic_groups(const Dataset& snapshot) {
    const std::size_t state = find_feature(snapshot.schema, "state", FeatureKind::Categorical);
    const std::size_t maturity =
        find_feature(snapshot.schema, "days_to_maturity", FeatureKind::Numerical);

    std::map<GroupKey, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        const auto& rec = snapshot.records[i];
        buckets[{rec.feature_cat[state], maturity_bucket(rec.feature_num[maturity])}]
            .push_back(i);
    }

    std::vector<GenericGroup> groups;
    groups.reserve(buckets.size());
    for (auto& [key, members] : buckets) groups.push_back({key, std::move(members)});
    return groups;
}

std::vector<GenericGroup> build_generic_groups(const Dataset& snapshot,
                                               const std::vector<std::size_t>& subset) {
    const std::size_t state = find_feature(snapshot.schema, "state", FeatureKind::Categorical);
    const std::size_t maturity =
        find_feature(snapshot.schema, "days_to_maturity", FeatureKind::Numerical);

    std::map<GroupKey, std::vector<std::size_t>> buckets;
    for (std::size_t pos : subset) {
        if (pos >= snapshot.size()) throw std::out_of_range("record position out of range");
        const auto& rec = snapshot.records[pos];
        buckets[{rec.feature_cat[state], maturity_bucket(rec.feature_num[maturity])}]
            .push_back(pos);
    }

    std::vector<GenericGroup> groups;
    groups.reserve(buckets.size());
    for (auto& [key, members] : buckets) groups.push_back({key, std::move(members)});
    return groups;
}

std::string method_name(RankMethod method) {
    switch (method) {
        case RankMethod::kYield: return "yield";
        case RankMethod::kDxsCohort: return "dxs_cohort";
        case RankMethod::kSimilarityCohort: return "similarity_cohort";
    }
    throw std::logic_error("unreachable");
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return (values[mid - 1] + values[mid]) / 2.0;
}

RankedList rank_by_yield(const Dataset& snapshot, const GenericGroup& group) {
    RankedList list;
    list.method = RankMethod::kYield;
    for (std::size_t pos : group.members) {
        const auto& rec = snapshot.records[pos];
        list.entries.push_back({rec.id, pos, 0, rec.yield(), 0.0});
    }
    sort_entries(list.entries);
    return list;
}

RankedList rank_by_dxs_cohort(const Dataset& snapshot, const GenericGroup& group,
                              std::size_t k) {
    bool handled = false;
    RankedList list = cohort_skeleton(RankMethod::kDxsCohort, k, snapshot, group, handled);
    if (handled) return list;

    std::vector<double> relative_values(group.members.size(), 0.0);
    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < group.members.size(); ++s) {
        const auto& self = snapshot.records[group.members[s]];
        order.clear();
        for (std::size_t o = 0; o < group.members.size(); ++o)
            if (o != s) order.push_back(o);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double da = std::abs(snapshot.records[group.members[a]].dxs - self.dxs);
            const double db = std::abs(snapshot.records[group.members[b]].dxs - self.dxs);
            if (da != db) return da < db;
            return snapshot.records[group.members[a]].id < snapshot.records[group.members[b]].id;
        });
        order.resize(std::min(k, order.size()));
        std::vector<double> yields;
        yields.reserve(order.size());
        for (std::size_t o : order) yields.push_back(snapshot.records[group.members[o]].yield());
        relative_values[s] = self.yield() - median(std::move(yields));
    }
    return rank_cohort_entries(std::move(list), snapshot, group, relative_values);
}

RankedList rank_by_similarity_cohort(const Dataset& snapshot, const GenericGroup& group,
                                     const ProximityIndex& index, std::size_t k) {
    for (std::size_t pos : group.members) {
        if (pos >= index.records() || index.ids[pos] != snapshot.records[pos].id)
            throw std::invalid_argument("proximity index does not cover the snapshot");
    }
    return rank_by_similarity_cohort(snapshot, group, index, k,
                                     pairwise_proximity(index, group.members));
}

RankedList rank_by_similarity_cohort(const Dataset& snapshot, const GenericGroup& group,
                                     const ProximityIndex& index, std::size_t k,
                                     const std::vector<std::vector<double>>& matrix) {
    for (std::size_t pos : group.members) {
        if (pos >= index.records() || index.ids[pos] != snapshot.records[pos].id)
            throw std::invalid_argument("proximity index does not cover the snapshot");
    }
    if (matrix.size() != group.members.size())
        throw std::invalid_argument("proximity matrix does not match the group");
    bool handled = false;
    RankedList list =
        cohort_skeleton(RankMethod::kSimilarityCohort, k, snapshot, group, handled);
    if (handled) return list;

    std::vector<double> relative_values(group.members.size(), 0.0);
    std::vector<std::size_t> candidates;
    std::vector<double> row;
    for (std::size_t s = 0; s < group.members.size(); ++s) {
        candidates.clear();
        row.clear();
        for (std::size_t o = 0; o < group.members.size(); ++o)
            if (o != s) {
                candidates.push_back(group.members[o]);
                row.push_back(matrix[s][o]);
            }
        const auto top = top_neighbors(index, candidates, row, k);
        std::vector<double> yields;
        yields.reserve(top.neighbors.size());
        for (const auto& neighbor : top.neighbors)
            yields.push_back(snapshot.records[neighbor.position].yield());
        relative_values[s] =
            snapshot.records[group.members[s]].yield() - median(std::move(yields));
    }
    return rank_cohort_entries(std::move(list), snapshot, group, relative_values);
}

void write_rankings_csv(const std::string& path, const std::string& date,
                        const std::vector<std::pair<GroupKey, RankedList>>& rankings,
                        const std::string& provenance) {
    csv::Writer out(path);
    if (!provenance.empty()) out.comment(provenance);
    out.row({"date", "group_key", "method", "k", "rank", "bond_id", "score", "rv"});
    for (const auto& [key, list] : rankings)
        for (const auto& entry : list.entries)
            out.row({date, key.label(), method_name(list.method), std::to_string(list.k),
                     std::to_string(entry.rank), entry.id, csv::format_double(entry.score),
                     csv::format_double(entry.relative_value)});
}

}  // namespace relval
