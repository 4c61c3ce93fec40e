#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "relval/data_model.hpp"

namespace relval {

/// Accumulated target statistics for one categorical token.
struct TokenStats {
    double sum = 0.0;
    std::uint64_t count = 0;
};

/// Target-statistics encoder for the categorical features of one schema.
/// Unseen tokens encode to the prior (the zero-statistics case of the same
/// formula), so transform never fails on new data.
struct CategoricalEncoder {
    std::map<std::size_t, std::map<std::string, TokenStats>> stats;  // feature index -> token stats
    double prior = 0.0;
    double prior_weight = 1.0;
    std::uint64_t seed = 0;

    bool empty() const { return stats.empty(); }
    double encode(std::size_t feature, const std::string& token) const;
};

/// Fit output: the encoder plus the fully numerical training matrix
/// (feature-major, numerical columns passed through) and the visit order
/// that produced the ordered statistics.
struct OrderedEncoding {
    CategoricalEncoder encoder;
    std::vector<std::vector<double>> columns;
    std::vector<std::size_t> order;
};

/// Ordered target-statistics fit: rows are visited in one seeded random
/// permutation and each row is encoded from the statistics of the rows
/// visited before it, so no row sees its own target.
OrderedEncoding fit_ordered_encoding(const Dataset& train, std::size_t target_dim,
                                     std::uint64_t seed, double prior_weight = 1.0);

/// Encode with the full fitted statistics; order-free and deterministic.
std::vector<std::vector<double>> transform(const CategoricalEncoder& encoder,
                                           const Dataset& dataset);

/// Candidate split thresholds at quantile midpoints, at most max_borders of
/// them, each strictly between two observed values. Constant columns yield
/// an empty list.
std::vector<double> compute_borders(std::vector<double> column, std::size_t max_borders);

/// Bin index of x against sorted borders: the count of borders strictly
/// below x, so (x > borders[j]) iff (bin(x) > j).
std::size_t bin_value(double x, const std::vector<double>& borders);

}  // namespace relval
