#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relval/data_model.hpp"
#include "relval/proximity.hpp"

namespace relval {

/// Bucket label for a positive days-to-maturity: Y1..Y10 cover (n-1, n]
/// years with a 365.25-day year, then Y10_15 covers (10, 15] and Y15PLUS the
/// open tail.
std::string maturity_bucket(double days_to_maturity);

/// Buckets in ascending maturity order; useful for deterministic sorting.
std::size_t bucket_rank(const std::string& bucket);

struct GroupKey {
    std::string state;
    std::string bucket;

    std::string label() const { return state + "|" + bucket; }
};

bool operator==(const GroupKey& a, const GroupKey& b);
bool operator<(const GroupKey& a, const GroupKey& b);

/// Bonds sharing issuing state and maturity bucket; members index into the
/// snapshot the group was built from.
struct GenericGroup {
    GroupKey key;
    std::vector<std::size_t> members;
};

GroupKey assign_generic_group(const Dataset& snapshot, std::size_t position);

/// All groups of the snapshot, sorted by state then bucket; member lists keep
/// snapshot order.
std::vector<GenericGroup> build_generic_groups(const Dataset& snapshot);

/// Groups over a subset of the snapshot (for example, one day's order flow);
/// members are positions into the full snapshot.
std::vector<GenericGroup> build_generic_groups(const Dataset& snapshot,
                                               const std::vector<std::size_t>& subset);

enum class RankMethod { kYield, kDxsCohort, kSimilarityCohort };

std::string method_name(RankMethod method);

struct RankedEntry {
    std::string id;
    std::size_t position = 0;      // into the snapshot
    std::size_t rank = 0;          // 1 = most attractive
    double score = 0.0;            // yield, or rv for cohort methods
    double relative_value = 0.0;   // yield minus cohort median yield
};

struct RankedList {
    RankMethod method = RankMethod::kYield;
    std::size_t k = 0;
    std::vector<RankedEntry> entries;  // score descending, id ascending on ties
    bool degenerate = false;           // singleton group
    bool short_cohort = false;         // fewer cohort candidates than k
};

/// Mean of the two central values on even counts.
double median(std::vector<double> values);

RankedList rank_by_yield(const Dataset& snapshot, const GenericGroup& group);

/// Cohort = k smallest |dxs - own dxs| within the group (self excluded, id
/// tie-break); rv = own yield minus cohort median yield, ranked descending.
RankedList rank_by_dxs_cohort(const Dataset& snapshot, const GenericGroup& group,
                              std::size_t k);

/// Cohort = k nearest group members by model proximity; scoring as the DxS
/// variant. Index positions must mirror the snapshot.
RankedList rank_by_similarity_cohort(const Dataset& snapshot, const GenericGroup& group,
                                     const ProximityIndex& index, std::size_t k);

/// As above, but with the group's pairwise proximity matrix precomputed via
/// pairwise_proximity(index, group.members); lets one matrix serve many k.
RankedList rank_by_similarity_cohort(const Dataset& snapshot, const GenericGroup& group,
                                     const ProximityIndex& index, std::size_t k,
                                     const std::vector<std::vector<double>>& matrix);

/// CSV rows (date, group_key, method, k, rank, bond_id, score, rv). A
/// non-empty provenance string becomes a leading comment.
void write_rankings_csv(const std::string& path, const std::string& date,
                        const std::vector<std::pair<GroupKey, RankedList>>& rankings,
                        const std::string& provenance = "");

}  // namespace relval
