#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace relval {

enum class FeatureKind { Numerical, Categorical };

constexpr const char* kMissingToken = "__MISSING__";

struct FeatureDef {
    std::string name;
    FeatureKind kind = FeatureKind::Numerical;
    std::string unit;  // informational only
};

/// Ordered feature layout shared by every record of a dataset. Target names
/// are fixed per dataset and disjoint from the feature names.
struct FeatureSchema {
    std::vector<FeatureDef> features;
    std::vector<std::string> target_names;  // e.g. {"oas", "yield"}

    std::size_t n_features() const { return features.size(); }
    std::size_t n_targets() const { return target_names.size(); }
    bool is_numerical(std::size_t f) const { return features[f].kind == FeatureKind::Numerical; }

    // -1 when absent
    int feature_index(const std::string& name) const;

    // FNV-1a over names/kinds/targets; persisted with models so that a model
    // is never applied to a structurally different dataset.
    std::string fingerprint() const;
};

/// One instrument. feature_num / feature_cat are parallel to the schema:
/// only the slot matching the feature's kind is meaningful.
struct BondRecord {
    std::string id;
    std::vector<double> feature_num;
    std::vector<std::string> feature_cat;
    std::vector<double> targets;  // [oas (bp), yield (%)]
    double duration = 0.0;        // years
    double dxs = 0.0;             // duration * oas
    std::optional<int> last_trade_offset_days;

    double oas() const { return targets.at(0); }
    double yield() const { return targets.at(1); }
};

struct Dataset {
    FeatureSchema schema;
    std::vector<BondRecord> records;
    std::vector<double> sample_weights;  // empty = unweighted

    std::size_t size() const { return records.size(); }
    bool has_weights() const { return !sample_weights.empty(); }
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    std::vector<std::size_t> test;
};

struct SplitFractions {
    double train = 0.64;
    double valid = 0.16;
    double test = 0.20;
};

/// Per-target clip thresholds produced by winsorization.
struct TargetBounds {
    std::vector<double> lower;
    std::vector<double> upper;
};

// ---------------------------------------------------------------------------
// operations

/// Report-style validation; empty result means the dataset is well formed.
std::vector<std::string> validate_dataset(const Dataset& dataset);

/// Seeded shuffle then floor-allocated partition; the remainder goes to train.
SplitIndices split_dataset(const Dataset& dataset, std::uint64_t seed,
                           const SplitFractions& fractions = {});

/// Interpolated percentile of an unsorted sample, pct in [0, 100].
double percentile(std::vector<double> sample, double pct);

/// Clip thresholds per target dimension at the given empirical percentiles.
TargetBounds winsorize_bounds(const Dataset& dataset, double lower_pct, double upper_pct);

/// Clip every target to the given per-dimension bounds. Idempotent for fixed
/// bounds; features are untouched.
Dataset clip_targets(const Dataset& dataset, const TargetBounds& bounds);

Dataset winsorize_targets(const Dataset& dataset, double lower_pct, double upper_pct);

/// w_i = max(floor, 1 - last_trade_offset_days / window_days); records that
/// never traded get the floor.
std::vector<double> compute_sample_weights(const Dataset& dataset, int window_days, double floor);

/// Row subset preserving schema (weights subset too, when present).
Dataset take(const Dataset& dataset, const std::vector<std::size_t>& indices);

}  // namespace relval
