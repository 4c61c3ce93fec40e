#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relval/data_model.hpp"

namespace relval {

/// Knobs for the synthetic muni-like market. Noise levels are in target
/// units (OAS bp, yield percent); the reversion half-life shapes the yield
/// paths (a huge value degenerates to a random walk, i.e. no signal).
struct GeneratorConfig {
    std::size_t n_bonds = 1000;
    std::size_t n_states = 10;
    std::uint64_t seed = 1;
    double noise_std_oas = 0.0;
    double noise_std_yield = 0.0;
    double reversion_half_life_days = 30.0;
    double residual_std_yield = 0.30;
    double innovation_std_yield = 0.02;
    std::size_t trade_orders_per_day = 100;
    std::size_t horizon_days = 120;
};

/// The fixed instrument schema every generated dataset uses.
FeatureSchema bond_schema();

/// Feature matrix only; targets stay zero until generate_targets fills them.
Dataset generate_universe(const GeneratorConfig& config);

/// Targets plus the noiseless signal values they were drawn around, so the
/// attainable R-squared is known exactly.
struct GeneratedTargets {
    Dataset dataset;
    std::vector<double> fair_oas;
    std::vector<double> fair_yield;
};

GeneratedTargets generate_targets(const Dataset& universe, const GeneratorConfig& config);

double sample_variance(const std::vector<double>& xs);

/// Noise level that makes Var(signal) / (Var(signal) + noise^2) equal r2.
double noise_for_target_r2(const std::vector<double>& signal, double r2);

/// Daily yield series per bond: fair yield plus a mean-reverting residual.
/// The residual ground truth is kept for oracle checks.
struct MarketPath {
    std::vector<std::string> bond_ids;
    std::vector<std::vector<double>> yields;
    std::vector<std::vector<double>> residuals;
};

MarketPath generate_paths(const GeneratedTargets& targets, const GeneratorConfig& config);

/// Per-day decay multiplier 2^(-days / half_life).
double reversion_factor(double half_life_days, double days);

/// Bonds offered for sale each day, as record indices into the universe.
struct TradeOrderBook {
    std::vector<std::vector<std::size_t>> days;
};

TradeOrderBook generate_orders(const Dataset& dataset, const GeneratorConfig& config);

void save_paths(const MarketPath& paths, const std::string& csv_path);
MarketPath load_paths(const std::string& csv_path);
void save_orders(const TradeOrderBook& book, const Dataset& dataset, const std::string& csv_path);
TradeOrderBook load_orders(const std::string& csv_path, const Dataset& dataset);

}  // namespace relval
