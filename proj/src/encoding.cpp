#include "relval/encoding.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "relval/rng.hpp"

namespace relval {

double CategoricalEncoder::encode(std::size_t feature, const std::string& token) const {
    TokenStats ts;
    auto fit = stats.find(feature);
    if (fit != stats.end()) {
        auto tit = fit->second.find(token);
        if (tit != fit->second.end()) ts = tit->second;
    }
    return (ts.sum + prior * prior_weight) / (static_cast<double>(ts.count) + prior_weight);
}

OrderedEncoding fit_ordered_encoding(const Dataset& train, std::size_t target_dim,
                                     std::uint64_t seed, double prior_weight) {
    if (train.records.empty()) throw std::invalid_argument("cannot fit encoder on empty dataset");
    if (target_dim >= train.schema.n_targets())
        throw std::invalid_argument("target dimension out of range");
    if (prior_weight <= 0.0) throw std::invalid_argument("prior_weight must be positive");

    const auto& schema = train.schema;
    const std::size_t n = train.records.size();

    OrderedEncoding out;
    out.encoder.prior_weight = prior_weight;
    out.encoder.seed = seed;
    double prior = 0.0;
    for (const auto& rec : train.records) prior += rec.targets[target_dim];
    prior /= static_cast<double>(n);
    out.encoder.prior = prior;

    out.columns.assign(schema.n_features(), std::vector<double>(n, 0.0));
    for (std::size_t f = 0; f < schema.n_features(); ++f)
        if (schema.is_numerical(f))
            for (std::size_t i = 0; i < n; ++i) out.columns[f][i] = train.records[i].feature_num[f];

    out.order.resize(n);
    std::iota(out.order.begin(), out.order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(out.order);

    for (std::size_t f = 0; f < schema.n_features(); ++f) {
        if (schema.is_numerical(f)) continue;
        std::map<std::string, TokenStats> running;
        for (std::size_t i : out.order) {
            const auto& token = train.records[i].feature_cat[f];
            auto& ts = running[token];
            out.columns[f][i] = (ts.sum + prior * prior_weight) /
                                (static_cast<double>(ts.count) + prior_weight);
            ts.sum += train.records[i].targets[target_dim];
            ts.count += 1;
        }
        out.encoder.stats[f] = std::move(running);
    }
    return out;
}

std::vector<std::vector<double>> transform(const CategoricalEncoder& encoder,
                                           const Dataset& dataset) {
    const auto& schema = dataset.schema;
    const std::size_t n = dataset.records.size();
    std::vector<std::vector<double>> columns(schema.n_features(), std::vector<double>(n, 0.0));
    for (std::size_t f = 0; f < schema.n_features(); ++f) {
        if (schema.is_numerical(f)) {
            for (std::size_t i = 0; i < n; ++i) columns[f][i] = dataset.records[i].feature_num[f];
        } else {
            for (std::size_t i = 0; i < n; ++i)
                columns[f][i] = encoder.encode(f, dataset.records[i].feature_cat[f]);
        }
    }
    return columns;
}

std::vector<double> compute_borders(std::vector<double> column, std::size_t max_borders) {
    if (max_borders == 0) throw std::invalid_argument("max_borders must be at least 1");
    std::sort(column.begin(), column.end());

    std::vector<double> distinct;
    for (double v : column)
        if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
    if (distinct.size() < 2) return {};

    std::vector<double> borders;
    if (distinct.size() <= max_borders + 1) {
        for (std::size_t k = 0; k + 1 < distinct.size(); ++k)
            borders.push_back(0.5 * (distinct[k] + distinct[k + 1]));
        return borders;
    }

    // More distinct values than borders: cut at evenly spaced sample ranks,
    // snapping each cut to the nearest value boundary at-or-above it.
    std::vector<std::size_t> cum(distinct.size(), 0);
    {
        std::size_t k = 0;
        for (std::size_t i = 0; i < column.size(); ++i) {
            while (column[i] != distinct[k]) ++k;
            ++cum[k];
        }
        for (std::size_t j = 1; j < cum.size(); ++j) cum[j] += cum[j - 1];
    }
    const double n = static_cast<double>(column.size());
    std::size_t prev_k = distinct.size();
    for (std::size_t j = 1; j <= max_borders; ++j) {
        const double rank = n * static_cast<double>(j) / static_cast<double>(max_borders + 1);
        std::size_t k = 0;
        while (k + 2 < distinct.size() && static_cast<double>(cum[k]) < rank) ++k;
        if (k != prev_k) borders.push_back(0.5 * (distinct[k] + distinct[k + 1]));
        prev_k = k;
    }
    return borders;
}

std::size_t bin_value(double x, const std::vector<double>& borders) {
    return static_cast<std::size_t>(
        std::lower_bound(borders.begin(), borders.end(), x) - borders.begin());
}

}  // namespace relval
