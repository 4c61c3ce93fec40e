#pragma once

#include <optional>
#include <vector>

namespace relval {

/// Standard regression metrics for one target dimension.
struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    double mape = 0.0;
    std::optional<double> r2;  // absent when the actuals have zero variance
};

/// Weighted metrics; empty weights means unit weights throughout.
Metrics evaluate(const std::vector<double>& pred, const std::vector<double>& actual,
                 const std::vector<double>& weights = {});

/// Multi-target weighted RMSE: sqrt(sum_i w_i sum_d (p_id - y_id)^2 / sum_i w_i).
double multirmse(const std::vector<std::vector<double>>& pred,
                 const std::vector<std::vector<double>>& actual,
                 const std::vector<double>& weights = {});

}  // namespace relval
