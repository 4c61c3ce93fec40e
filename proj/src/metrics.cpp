#include "relval/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace relval {

namespace {
constexpr double kMapeEps = 1e-8;  // guards division by near-zero actuals

void check_lengths(std::size_t pred, std::size_t actual, std::size_t weights) {
    if (pred == 0 || pred != actual)
        throw std::invalid_argument("metric inputs must have equal nonzero lengths");
    if (weights != 0 && weights != pred)
        throw std::invalid_argument("weight vector length does not match predictions");
}
}  // namespace

Metrics evaluate(const std::vector<double>& pred, const std::vector<double>& actual,
                 const std::vector<double>& weights) {
    check_lengths(pred.size(), actual.size(), weights.size());

    double wsum = 0.0, se = 0.0, ae = 0.0, ape = 0.0, ymean = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const double d = pred[i] - actual[i];
        se += w * d * d;
        ae += w * std::abs(d);
        ape += w * std::abs(d) / std::max(std::abs(actual[i]), kMapeEps);
        ymean += w * actual[i];
        wsum += w;
    }
    ymean /= wsum;

    double var = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        var += w * (actual[i] - ymean) * (actual[i] - ymean);
    }

    Metrics m;
    m.mse = se / wsum;
    m.mae = ae / wsum;
    m.mape = ape / wsum;
    if (var > 0.0) m.r2 = 1.0 - se / var;
    return m;
}

double multirmse(const std::vector<std::vector<double>>& pred,
                 const std::vector<std::vector<double>>& actual,
                 const std::vector<double>& weights) {
    check_lengths(pred.size(), actual.size(), weights.size());

    double num = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].size() != actual[i].size())
            throw std::invalid_argument("prediction and actual dimensions differ");
        const double w = weights.empty() ? 1.0 : weights[i];
        for (std::size_t d = 0; d < pred[i].size(); ++d) {
            const double diff = pred[i][d] - actual[i][d];
            num += w * diff * diff;
        }
        wsum += w;
    }
    return std::sqrt(num / wsum);
}

}  // namespace relval
