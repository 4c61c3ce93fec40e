#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relval/data_model.hpp"
#include "relval/proximity.hpp"
#include "relval/synthgen.hpp"
#include "relval/valuation.hpp"

namespace relval {

/// Ranking back-test over one testing month of simulated order flow.
///
/// Every day of the month, the bonds quoted in the order book are grouped
/// (state, maturity bucket) and ranked by each configured method. A group's
/// pick is scored against the realized return proxy over each horizon:
/// yield at the ranking day minus yield one, two, three or six months later.
struct BacktestConfig {
    std::size_t start_day = 0;
    std::size_t month_days = 30;
    std::vector<std::size_t> horizons = {1, 2, 3, 6};
    std::vector<std::size_t> k_values = {5, 10, 50, 100};
    std::vector<RankMethod> methods = {RankMethod::kYield, RankMethod::kDxsCohort,
                                       RankMethod::kSimilarityCohort};
    std::size_t top_m = 3;
};

/// One (method, k, horizon) cell of the report. The yield method ignores k
/// and is reported with k = 0. Metrics are percentages in [0, 100] and stay
/// unset when no group could be evaluated.
struct CellMetrics {
    RankMethod method = RankMethod::kYield;
    std::size_t k = 0;
    std::size_t horizon = 0;
    std::optional<double> metric1;
    std::optional<double> metric2;
    std::optional<double> combined;
    std::size_t units = 0;
    std::size_t small_groups = 0;
    std::size_t dropped_bonds = 0;
    std::size_t skipped_units = 0;
};

/// Per-unit score for the box-plot export: 100, 50 or 0 depending on how
/// many of the two metrics the (day, group) pair satisfied.
struct ScoreRow {
    RankMethod method = RankMethod::kYield;
    std::size_t k = 0;
    std::size_t horizon = 0;
    std::string group_key;
    std::size_t day = 0;
    double score = 0.0;
};

struct BacktestReport {
    std::vector<CellMetrics> cells;
    std::vector<ScoreRow> distribution;
    std::vector<std::size_t> empty_days;
    std::size_t degenerate_units = 0;
};

/// Rankings of one group on one day, one list per (method, k) pair in the
/// configured order (yield first when present, then each cohort method
/// crossed with every k).
struct GroupRankings {
    GenericGroup group;
    std::vector<RankedList> lists;
};

struct DayRankings {
    std::size_t day = 0;
    std::vector<GroupRankings> groups;
};

/// Realized-return ordering of a group's members between two days. Entries
/// are sorted by proxy descending with ascending-id tie-break; members whose
/// path ends before the later day are dropped and counted.
struct RealizedRanking {
    std::vector<RankedEntry> entries;
    std::size_t dropped = 0;
};

/// The universe dataset with yields replaced by the path values of one day.
/// Path rows must line up with universe records id for id.
Dataset snapshot_at(const Dataset& universe, const MarketPath& paths, std::size_t day);

/// Per-day rankings over the testing month. Days without orders are skipped;
/// groups of one bond are kept so callers can count them as degenerate.
std::vector<DayRankings> initial_rankings(const Dataset& universe, const MarketPath& paths,
                                          const TradeOrderBook& orders,
                                          const ProximityIndex& index,
                                          const BacktestConfig& config);

/// Realized ordering of `members` (universe positions) between `day` and
/// `day + horizon_days`.
RealizedRanking realized_ranking(const Dataset& universe, const MarketPath& paths,
                                 const std::vector<std::size_t>& members, std::size_t day,
                                 std::size_t horizon_days);

/// Share of groups whose initially top-ranked bond landed in the realized
/// top `top_m`, as a percentage. Unset when no unit is evaluable.
std::optional<double> metric_top_ranked_in_top(
    const std::vector<std::pair<RankedList, RealizedRanking>>& units, std::size_t top_m);

/// Share of groups whose realized best performer had been ranked in the
/// initial top `top_m`, as a percentage. Unset when no unit is evaluable.
std::optional<double> metric_top_return_from_top(
    const std::vector<std::pair<RankedList, RealizedRanking>>& units, std::size_t top_m);

/// Full sweep: every configured method, k and horizon over the testing
/// month. Deterministic given its inputs.
BacktestReport run_backtest(const Dataset& universe, const MarketPath& paths,
                            const TradeOrderBook& orders, const ProximityIndex& index,
                            const BacktestConfig& config);

/// Percentile bootstrap confidence interval for the mean of `values`.
struct BootstrapInterval {
    double lo = 0.0;
    double hi = 0.0;
};
BootstrapInterval bootstrap_ci_mean(const std::vector<double>& values,
                                    std::size_t n_resamples, double level,
                                    std::uint64_t seed);

/// Report as JSON (sorted keys, stable float formatting). A non-empty
/// provenance string is embedded under a "provenance" key.
void write_report_json(const std::string& path, const BacktestReport& report,
                       const std::string& provenance = "");

/// Box-plot rows as CSV (method, k, horizon, group_key, day, score). A
/// non-empty provenance string becomes a leading comment.
void write_scores_csv(const std::string& path, const BacktestReport& report,
                      const std::string& provenance = "");

}  // namespace relval
