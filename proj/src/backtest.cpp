#include "relval/backtest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "relval/csv.hpp"
#include "relval/rng.hpp"

namespace relval {

using nlohmann::json;

namespace {

// One report column: the yield method carries k = 0, cohort methods are
// crossed with the full k grid.
struct CellSpec {
    RankMethod method;
    std::size_t k;
};

std::vector<CellSpec> cell_specs(const BacktestConfig& config) {
    std::vector<CellSpec> specs;
    for (RankMethod method : config.methods) {
        if (method == RankMethod::kYield) {
            specs.push_back({method, 0});
        } else {
            for (std::size_t k : config.k_values) specs.push_back({method, k});
        }
    }
    return specs;
}

void check_config(const BacktestConfig& config) {
    if (config.month_days == 0)
        throw std::invalid_argument("month length must be positive");
    if (config.top_m == 0) throw std::invalid_argument("top_m must be positive");
    if (config.horizons.empty())
        throw std::invalid_argument("at least one horizon is required");
    for (std::size_t h = 0; h < config.horizons.size(); ++h)
        if (config.horizons[h] == 0 ||
            (h > 0 && config.horizons[h] <= config.horizons[h - 1]))
            throw std::invalid_argument("horizons must be positive and strictly increasing");
    if (config.methods.empty())
        throw std::invalid_argument("at least one method is required");
    for (std::size_t m = 0; m < config.methods.size(); ++m)
        for (std::size_t o = m + 1; o < config.methods.size(); ++o)
            if (config.methods[m] == config.methods[o])
                throw std::invalid_argument("methods must be unique");
    bool needs_k = false;
    for (RankMethod method : config.methods) needs_k |= method != RankMethod::kYield;
    if (!needs_k) return;
    if (config.k_values.empty())
        throw std::invalid_argument("cohort methods require at least one k");
    if (config.k_values[0] == 0)
        throw std::invalid_argument("cohort size k must be positive");
    for (std::size_t i = 1; i < config.k_values.size(); ++i)
        if (config.k_values[i] <= config.k_values[i - 1])
            throw std::invalid_argument("k values must be strictly increasing");
}

void check_alignment(const Dataset& universe, const MarketPath& paths) {
    if (paths.bond_ids.size() != universe.size() ||
        paths.yields.size() != universe.size())
        throw std::invalid_argument("market paths do not cover the universe");
    for (std::size_t i = 0; i < universe.size(); ++i)
        if (paths.bond_ids[i] != universe.records[i].id)
            throw std::invalid_argument("market paths do not cover the universe");
}

void check_index(const Dataset& universe, const ProximityIndex& index) {
    if (index.records() != universe.size())
        throw std::invalid_argument("proximity index does not cover the snapshot");
    for (std::size_t i = 0; i < universe.size(); ++i)
        if (index.ids[i] != universe.records[i].id)
            throw std::invalid_argument("proximity index does not cover the snapshot");
}

void sort_by_score(std::vector<RankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    for (std::size_t r = 0; r < entries.size(); ++r) entries[r].rank = r + 1;
}

std::vector<std::size_t> ordered_positions(const TradeOrderBook& orders, std::size_t day,
                                           std::size_t universe_size) {
    std::vector<std::size_t> positions = orders.days.at(day);
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    if (!positions.empty() && positions.back() >= universe_size)
        throw std::out_of_range("order refers to a record outside the universe");
    return positions;
}

// All configured lists for one group, sharing a single pairwise proximity
// matrix across the similarity k values.
std::vector<RankedList> group_lists(const Dataset& snapshot, const GenericGroup& group,
                                    const ProximityIndex& index,
                                    const std::vector<CellSpec>& specs) {
    std::vector<RankedList> lists;
    lists.reserve(specs.size());
    std::vector<std::vector<double>> matrix;
    bool have_matrix = false;
    for (const CellSpec& spec : specs) {
        switch (spec.method) {
            case RankMethod::kYield:
                lists.push_back(rank_by_yield(snapshot, group));
                break;
            case RankMethod::kDxsCohort:
                lists.push_back(rank_by_dxs_cohort(snapshot, group, spec.k));
                break;
            case RankMethod::kSimilarityCohort:
                if (!have_matrix) {
                    matrix = pairwise_proximity(index, group.members);
                    have_matrix = true;
                }
                lists.push_back(
                    rank_by_similarity_cohort(snapshot, group, index, spec.k, matrix));
                break;
        }
    }
    return lists;
}

RealizedRanking realized_unchecked(const Dataset& universe, const MarketPath& paths,
                                   const std::vector<std::size_t>& members, std::size_t day,
                                   std::size_t horizon_days) {
    RealizedRanking out;
    const std::size_t later = day + horizon_days;
    for (std::size_t pos : members) {
        if (pos >= universe.size())
            throw std::out_of_range("record position out of range");
        const auto& series = paths.yields[pos];
        if (day >= series.size() || later >= series.size()) {
            ++out.dropped;
            continue;
        }
        out.entries.push_back(
            {universe.records[pos].id, pos, 0, series[day] - series[later], 0.0});
    }
    sort_by_score(out.entries);
    return out;
}

struct UnitOutcome {
    bool evaluable = false;
    bool hit1 = false;
    bool hit2 = false;
};

// Scores one (day, group) pair. Bonds absent from the realized ranking are
// dropped from the initial one as well, so both sides rank the same set.
UnitOutcome score_unit(const RankedList& initial, const RealizedRanking& realized,
                       std::size_t top_m) {
    UnitOutcome outcome;
    if (realized.entries.size() < 2) return outcome;
    std::map<std::size_t, std::size_t> realized_rank;
    for (const auto& entry : realized.entries) realized_rank.emplace(entry.position, entry.rank);
    std::vector<const RankedEntry*> surviving;
    surviving.reserve(initial.entries.size());
    for (const auto& entry : initial.entries)
        if (realized_rank.count(entry.position) != 0) surviving.push_back(&entry);
    if (surviving.size() < 2) return outcome;

    outcome.evaluable = true;
    outcome.hit1 = realized_rank[surviving.front()->position] <= top_m;
    const std::size_t best_return = realized.entries.front().position;
    for (std::size_t r = 0; r < surviving.size(); ++r)
        if (surviving[r]->position == best_return) {
            outcome.hit2 = r + 1 <= top_m;
            break;
        }
    return outcome;
}

std::optional<double> indicator_percent(
    const std::vector<std::pair<RankedList, RealizedRanking>>& units, std::size_t top_m,
    bool second) {
    if (top_m == 0) throw std::invalid_argument("top_m must be positive");
    std::size_t evaluated = 0;
    std::size_t qualified = 0;
    for (const auto& [initial, realized] : units) {
        const UnitOutcome outcome = score_unit(initial, realized, top_m);
        if (!outcome.evaluable) continue;
        ++evaluated;
        qualified += (second ? outcome.hit2 : outcome.hit1) ? 1 : 0;
    }
    if (evaluated == 0) return std::nullopt;
    return 100.0 * static_cast<double>(qualified) / static_cast<double>(evaluated);
}

}  // namespace

Dataset snapshot_at(const Dataset& universe, const MarketPath& paths, std::size_t day) {
    check_alignment(universe, paths);
    Dataset snapshot = universe;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        if (day >= paths.yields[i].size())
            throw std::invalid_argument("market paths end before the requested day");
        snapshot.records[i].targets[1] = paths.yields[i][day];
    }
    return snapshot;
}

std::vector<DayRankings> initial_rankings(const Dataset& universe, const MarketPath& paths,
                                          const TradeOrderBook& orders,
                                          const ProximityIndex& index,
                                          const BacktestConfig& config) {
    check_config(config);
    check_alignment(universe, paths);
    for (RankMethod method : config.methods)
        if (method == RankMethod::kSimilarityCohort) check_index(universe, index);
    const auto specs = cell_specs(config);
    const std::size_t end_day = config.start_day + config.month_days;
    if (orders.days.size() < end_day)
        throw std::invalid_argument("order book ends before the testing month");

    std::vector<DayRankings> days;
    Dataset snapshot = universe;
    for (std::size_t day = config.start_day; day < end_day; ++day) {
        const auto positions = ordered_positions(orders, day, universe.size());
        if (positions.empty()) continue;
        for (std::size_t pos : positions) {
            if (day >= paths.yields[pos].size())
                throw std::invalid_argument("market paths end before the testing month");
            snapshot.records[pos].targets[1] = paths.yields[pos][day];
        }
        DayRankings entry;
        entry.day = day;
        for (auto& group : build_generic_groups(snapshot, positions))
            entry.groups.push_back({group, group_lists(snapshot, group, index, specs)});
        days.push_back(std::move(entry));
    }
    return days;
}

RealizedRanking realized_ranking(const Dataset& universe, const MarketPath& paths,
                                 const std::vector<std::size_t>& members, std::size_t day,
                                 std::size_t horizon_days) {
    check_alignment(universe, paths);
    return realized_unchecked(universe, paths, members, day, horizon_days);
}

std::optional<double> metric_top_ranked_in_top(
    const std::vector<std::pair<RankedList, RealizedRanking>>& units, std::size_t top_m) {
    return indicator_percent(units, top_m, false);
}

std::optional<double> metric_top_return_from_top(
    const std::vector<std::pair<RankedList, RealizedRanking>>& units, std::size_t top_m) {
    return indicator_percent(units, top_m, true);
}

BacktestReport run_backtest(const Dataset& universe, const MarketPath& paths,
                            const TradeOrderBook& orders, const ProximityIndex& index,
                            const BacktestConfig& config) {
    check_config(config);
    check_alignment(universe, paths);
    for (RankMethod method : config.methods)
        if (method == RankMethod::kSimilarityCohort) check_index(universe, index);
    const auto specs = cell_specs(config);
    const std::size_t end_day = config.start_day + config.month_days;
    if (orders.days.size() < end_day)
        throw std::invalid_argument("order book ends before the testing month");

    struct Accum {
        std::size_t units = 0;
        std::size_t hits1 = 0;
        std::size_t hits2 = 0;
        std::size_t small = 0;
        std::size_t dropped = 0;
        std::size_t skipped = 0;
    };
    std::vector<std::vector<Accum>> acc(specs.size(),
                                        std::vector<Accum>(config.horizons.size()));

    BacktestReport report;
    Dataset snapshot = universe;
    for (std::size_t day = config.start_day; day < end_day; ++day) {
        const auto positions = ordered_positions(orders, day, universe.size());
        if (positions.empty()) {
            report.empty_days.push_back(day);
            continue;
        }
        for (std::size_t pos : positions) {
            if (day >= paths.yields[pos].size())
                throw std::invalid_argument("market paths end before the testing month");
            snapshot.records[pos].targets[1] = paths.yields[pos][day];
        }
        for (const auto& group : build_generic_groups(snapshot, positions)) {
            if (group.members.size() < 2) {
                ++report.degenerate_units;
                continue;
            }
            const auto lists = group_lists(snapshot, group, index, specs);
            for (std::size_t h = 0; h < config.horizons.size(); ++h) {
                const auto realized = realized_unchecked(
                    universe, paths, group.members, day,
                    config.horizons[h] * config.month_days);
                for (std::size_t s = 0; s < specs.size(); ++s) {
                    Accum& cell = acc[s][h];
                    cell.dropped += realized.dropped;
                    const UnitOutcome outcome = score_unit(lists[s], realized, config.top_m);
                    if (!outcome.evaluable) {
                        ++cell.skipped;
                        continue;
                    }
                    ++cell.units;
                    cell.hits1 += outcome.hit1 ? 1 : 0;
                    cell.hits2 += outcome.hit2 ? 1 : 0;
                    cell.small += realized.entries.size() < config.top_m + 1 ? 1 : 0;
                    report.distribution.push_back(
                        {specs[s].method, specs[s].k, config.horizons[h], group.key.label(),
                         day, 50.0 * (static_cast<int>(outcome.hit1) +
                                      static_cast<int>(outcome.hit2))});
                }
            }
        }
    }

    for (std::size_t s = 0; s < specs.size(); ++s)
        for (std::size_t h = 0; h < config.horizons.size(); ++h) {
            const Accum& a = acc[s][h];
            CellMetrics cell;
            cell.method = specs[s].method;
            cell.k = specs[s].k;
            cell.horizon = config.horizons[h];
            cell.units = a.units;
            cell.small_groups = a.small;
            cell.dropped_bonds = a.dropped;
            cell.skipped_units = a.skipped;
            if (a.units > 0) {
                cell.metric1 = 100.0 * static_cast<double>(a.hits1) /
                               static_cast<double>(a.units);
                cell.metric2 = 100.0 * static_cast<double>(a.hits2) /
                               static_cast<double>(a.units);
                cell.combined = (*cell.metric1 + *cell.metric2) / 2.0;
            }
            report.cells.push_back(std::move(cell));
        }
    return report;
}

BootstrapInterval bootstrap_ci_mean(const std::vector<double>& values,
                                    std::size_t n_resamples, double level,
                                    std::uint64_t seed) {
    if (values.empty()) throw std::invalid_argument("bootstrap over an empty sample");
    if (n_resamples == 0) throw std::invalid_argument("resample count must be positive");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("confidence level must lie in (0, 1)");
    const std::size_t n = values.size();
    Rng rng(seed);
    std::vector<double> means;
    means.reserve(n_resamples);
    for (std::size_t r = 0; r < n_resamples; ++r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sum += values[static_cast<std::size_t>(rng.uniform_int(n))];
        means.push_back(sum / static_cast<double>(n));
    }
    const double tail = 100.0 * (1.0 - level) / 2.0;
    return {percentile(means, tail), percentile(means, 100.0 - tail)};
}

void write_report_json(const std::string& path, const BacktestReport& report,
                       const std::string& provenance) {
    json cells = json::array();
    for (const auto& cell : report.cells) {
        json c{{"method", method_name(cell.method)},
               {"k", cell.k},
               {"horizon_months", cell.horizon},
               {"units", cell.units},
               {"small_groups", cell.small_groups},
               {"dropped_bonds", cell.dropped_bonds},
               {"skipped_units", cell.skipped_units}};
        c["metric1"] = cell.metric1 ? json(*cell.metric1) : json();
        c["metric2"] = cell.metric2 ? json(*cell.metric2) : json();
        c["combined"] = cell.combined ? json(*cell.combined) : json();
        cells.push_back(std::move(c));
    }
    json doc{{"format", "relval-backtest"},
             {"version", 1},
             {"cells", std::move(cells)},
             {"degenerate_units", report.degenerate_units},
             {"empty_days", report.empty_days}};
    if (!provenance.empty()) doc["provenance"] = provenance;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

void write_scores_csv(const std::string& path, const BacktestReport& report,
                      const std::string& provenance) {
    csv::Writer out(path);
    if (!provenance.empty()) out.comment(provenance);
    out.row({"method", "k", "horizon", "group_key", "day", "score"});
    for (const auto& row : report.distribution)
        out.row({method_name(row.method), std::to_string(row.k), std::to_string(row.horizon),
                 row.group_key, std::to_string(row.day), csv::format_double(row.score)});
}

}  // namespace relval
