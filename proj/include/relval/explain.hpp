#pragma once

#include <string>
#include <utility>
#include <vector>

#include "relval/data_model.hpp"
#include "relval/gbdt.hpp"

namespace relval {

/// Per-record Shapley attributions in destandardized target units.
/// Local accuracy: base[d] + sum over features of phi[record][f][d] equals
/// the model prediction for every record and dimension.
struct Attribution {
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;
    std::vector<std::string> record_ids;
    std::vector<double> base;                            // per target dimension
    std::vector<std::vector<std::vector<double>>> phi;   // [record][feature][dim]
};

/// Path-dependent TreeSHAP: conditional expectations weight each branch by
/// its share of the training cover stored on the leaves. Records are
/// processed in parallel when threads > 1; the result never depends on the
/// thread count.
Attribution tree_shap(const GBDTModel& model, const Dataset& records,
                      std::size_t threads = 1);

/// Mean absolute attribution per feature for one target dimension,
/// descending; ties fall back to feature name order.
std::vector<std::pair<std::string, double>> global_importance(const Attribution& attribution,
                                                              std::size_t dim);

/// CSV rows (record_id, feature, target_dim, phi).
void write_attribution_csv(const std::string& path, const Attribution& attribution,
                           const std::string& provenance = "");

/// JSON ranking per target dimension, for plotting.
void write_importance_json(const std::string& path, const Attribution& attribution,
                           const std::string& provenance = "");

}  // namespace relval
