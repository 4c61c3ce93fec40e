#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relval/data_model.hpp"
#include "relval/encoding.hpp"

namespace relval {

struct ObliviousSplit {
    std::size_t feature = 0;
    double threshold = 0.0;
};

/// Symmetric tree: one (feature, threshold) condition per depth level, shared
/// by every node of that level. A record's leaf index is the integer whose
/// bit k is 1 iff feature(splits[k]) > threshold[k].
struct ObliviousTree {
    std::vector<ObliviousSplit> splits;
    std::vector<std::vector<double>> leaf_values;  // 2^depth entries of dimension D
    std::vector<double> leaf_weights;              // training weight sum per leaf

    std::size_t depth() const { return splits.size(); }
    std::size_t leaf_count() const { return leaf_values.size(); }
    std::size_t leaf_of(const std::vector<std::vector<double>>& columns, std::size_t row) const;
};

/// Per-dimension affine map fitted on the training targets.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> std;
};

struct TrainConfig {
    std::size_t n_estimators = 500;
    std::size_t max_depth = 6;
    std::size_t max_borders = 128;
    double min_samples_leaf = 1.0;  // weighted count below which a leaf value is zeroed
    double learning_rate = 0.1;
    double feature_fraction = 1.0;
    std::uint64_t seed = 0;
    std::size_t early_stopping_rounds = 0;  // 0 disables validation-based stopping
};

struct GBDTModel {
    std::vector<ObliviousTree> trees;
    double learning_rate = 0.1;
    std::vector<double> base_prediction;  // in standardized target space
    Standardization standardization;
    CategoricalEncoder encoder;
    std::vector<std::vector<double>> borders;  // per feature; empty = unsplittable
    std::vector<double> error_trace;           // training MultiRMSE after 0..N trees
    std::string schema_fingerprint;
    TrainConfig config;

    std::size_t n_targets() const { return base_prediction.size(); }
};

GBDTModel train(const Dataset& train_fold, const TrainConfig& config);

/// Evaluates the validation fold each iteration; when early stopping is
/// enabled the ensemble is truncated at the best validation MultiRMSE.
GBDTModel train(const Dataset& train_fold, const Dataset& valid_fold, const TrainConfig& config);

std::vector<std::vector<double>> predict(const GBDTModel& model, const Dataset& dataset);

/// Leaf index per (record, tree). Records are processed in parallel when
/// threads > 1; the result never depends on the thread count.
std::vector<std::vector<std::uint32_t>> apply_leaves(const GBDTModel& model,
                                                     const Dataset& dataset,
                                                     std::size_t threads = 1);

void save_model(const GBDTModel& model, const std::string& path);
GBDTModel load_model(const std::string& path);

/// Uniform search box over training hyperparameters. Estimators move on a
/// step-25 grid; depth draws above the cap are clamped to it, which keeps the
/// leaf arrays of a symmetric tree at a sane size.
struct TuneSpace {
    std::size_t estimators_lo = 100, estimators_hi = 2000, estimators_step = 25;
    std::size_t depth_lo = 5, depth_hi = 25, depth_cap = 12;
    double min_samples_lo = 5, min_samples_hi = 100, min_samples_step = 25;
    double learning_rate_lo = 0.001, learning_rate_hi = 0.2;
    double feature_fraction_lo = 0.4, feature_fraction_hi = 0.8;
    std::size_t max_borders = 128;
    std::size_t early_stopping_rounds = 30;
};

struct TuneTrial {
    TrainConfig config;
    double valid_multirmse = 0.0;
    std::size_t trees_kept = 0;
};

struct TuneResult {
    TrainConfig best;
    double best_score = 0.0;
    std::vector<TuneTrial> trials;
};

TuneResult random_search_tune(const Dataset& train_fold, const Dataset& valid_fold,
                              const TuneSpace& space, std::size_t n_trials, std::uint64_t seed);

}  // namespace relval
