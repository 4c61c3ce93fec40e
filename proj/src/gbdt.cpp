#include "relval/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relval/metrics.hpp"
#include "relval/parallel.hpp"
#include "relval/rng.hpp"

namespace relval {

std::size_t ObliviousTree::leaf_of(const std::vector<std::vector<double>>& columns,
                                   std::size_t row) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < splits.size(); ++k)
        if (columns[splits[k].feature][row] > splits[k].threshold) idx |= std::size_t{1} << k;
    return idx;
}

namespace {

void check_train_config(const TrainConfig& config) {
    if (config.learning_rate <= 0.0 || config.learning_rate > 1.0)
        throw std::invalid_argument("learning_rate must lie in (0, 1]");
    if (config.feature_fraction <= 0.0 || config.feature_fraction > 1.0)
        throw std::invalid_argument("feature_fraction must lie in (0, 1]");
    if (config.max_borders == 0) throw std::invalid_argument("max_borders must be at least 1");
    if (config.min_samples_leaf < 0) throw std::invalid_argument("min_samples_leaf must be nonnegative");
}

struct FoldView {
    std::vector<std::vector<double>> columns;  // feature-major, fully numerical
    std::vector<std::vector<double>> y_std;    // record-major
    std::vector<double> weights;
    double weight_sum = 0.0;
};

std::vector<double> fold_weights(const Dataset& ds) {
    if (ds.has_weights()) return ds.sample_weights;
    return std::vector<double>(ds.size(), 1.0);
}

std::vector<std::vector<double>> standardize_targets(const Dataset& ds,
                                                     const Standardization& st) {
    const std::size_t d_count = st.mean.size();
    std::vector<std::vector<double>> out(ds.size(), std::vector<double>(d_count, 0.0));
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t d = 0; d < d_count; ++d)
            out[i][d] = (ds.records[i].targets[d] - st.mean[d]) / st.std[d];
    return out;
}

double std_space_multirmse(const std::vector<std::vector<double>>& resid,
                           const std::vector<double>& weights, double weight_sum) {
    double acc = 0.0;
    for (std::size_t i = 0; i < resid.size(); ++i) {
        double row = 0.0;
        for (double r : resid[i]) row += r * r;
        acc += weights[i] * row;
    }
    return std::sqrt(acc / weight_sum);
}

/// One boosting iteration's tree, grown level by level on pre-binned columns.
/// Leaves are tracked in compacted form (only populated ones) so deep trees
/// on small folds stay cheap.
class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<std::uint16_t>>& binned,
                const std::vector<std::vector<double>>& borders,
                const std::vector<std::size_t>& usable, const std::vector<double>& weights,
                std::size_t n_targets)
        : binned_(binned), borders_(borders), usable_(usable), weights_(weights),
          n_targets_(n_targets) {}

    ObliviousTree build(const std::vector<std::vector<double>>& resid, const TrainConfig& config,
                        Rng& rng) {
        const std::size_t n = weights_.size();
        leaf_of_.assign(n, 0);
        leaf_bits_ = {0};

        ObliviousTree tree;
        for (std::size_t level = 0; level < config.max_depth; ++level) {
            auto candidates = sample_features(config.feature_fraction, rng);
            if (candidates.empty()) break;

            // candidates ascend by feature and borders ascend by threshold, so
            // keeping the first strict maximum is the lowest-feature,
            // lowest-threshold tie-break
            double best_gain = 0.0;
            std::size_t best_feature = 0;
            std::size_t best_border = 0;
            bool found = false;
            for (std::size_t f : candidates) {
                scan_feature(f, resid, tree.splits, [&](std::size_t j, double gain) {
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = f;
                        best_border = j;
                        found = true;
                    }
                });
            }
            if (!found) break;

            apply_split(best_feature, best_border, level);
            tree.splits.push_back({best_feature, borders_[best_feature][best_border]});
        }

        finish_leaves(tree, resid, config);
        return tree;
    }

    // compact leaf id per training record, valid after build()
    const std::vector<std::uint32_t>& leaf_assignment() const { return leaf_of_; }
    const std::vector<std::uint32_t>& leaf_bits() const { return leaf_bits_; }

private:
    std::vector<std::size_t> sample_features(double fraction, Rng& rng) {
        if (usable_.empty()) return {};
        std::size_t m = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(usable_.size())));
        m = std::min(std::max<std::size_t>(m, 1), usable_.size());
        std::vector<std::size_t> pool = usable_;
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t k = j + static_cast<std::size_t>(rng.uniform_int(pool.size() - j));
            std::swap(pool[j], pool[k]);
        }
        pool.resize(m);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    template <typename Visit>
    void scan_feature(std::size_t f, const std::vector<std::vector<double>>& resid,
                      const std::vector<ObliviousSplit>& taken, Visit visit) {
        const std::size_t bins = borders_[f].size() + 1;
        const std::size_t leaves = leaf_bits_.size();
        hist_w_.assign(leaves * bins, 0.0);
        hist_s_.assign(leaves * bins * n_targets_, 0.0);

        const auto& col = binned_[f];
        for (std::size_t i = 0; i < col.size(); ++i) {
            const std::size_t slot = leaf_of_[i] * bins + col[i];
            hist_w_[slot] += weights_[i];
            double* s = &hist_s_[slot * n_targets_];
            const double w = weights_[i];
            for (std::size_t d = 0; d < n_targets_; ++d) s[d] += w * resid[i][d];
        }

        gain_.assign(bins - 1, 0.0);
        std::vector<double> cum(n_targets_), total(n_targets_);
        for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
            const double* w_row = &hist_w_[leaf * bins];
            const double* s_row = &hist_s_[leaf * bins * n_targets_];
            double tw = 0.0;
            std::fill(total.begin(), total.end(), 0.0);
            for (std::size_t b = 0; b < bins; ++b) {
                tw += w_row[b];
                for (std::size_t d = 0; d < n_targets_; ++d) total[d] += s_row[b * n_targets_ + d];
            }
            if (tw <= 0.0) continue;
            double parent = 0.0;
            for (std::size_t d = 0; d < n_targets_; ++d) parent += total[d] * total[d] / tw;

            double cw = 0.0;
            std::fill(cum.begin(), cum.end(), 0.0);
            for (std::size_t j = 0; j + 1 < bins; ++j) {
                cw += w_row[j];
                for (std::size_t d = 0; d < n_targets_; ++d) cum[d] += s_row[j * n_targets_ + d];
                double split_score = -parent;
                if (cw > 0.0)
                    for (std::size_t d = 0; d < n_targets_; ++d)
                        split_score += cum[d] * cum[d] / cw;
                const double rw = tw - cw;
                if (rw > 0.0)
                    for (std::size_t d = 0; d < n_targets_; ++d) {
                        const double rs = total[d] - cum[d];
                        split_score += rs * rs / rw;
                    }
                gain_[j] += split_score;
            }
        }

        for (std::size_t j = 0; j + 1 < bins; ++j) {
            bool duplicate = false;
            for (const auto& s : taken)
                if (s.feature == f && s.threshold == borders_[f][j]) duplicate = true;
            if (!duplicate) visit(j, gain_[j]);
        }
    }

    void apply_split(std::size_t f, std::size_t border, std::size_t level) {
        const std::size_t leaves = leaf_bits_.size();
        const auto& col = binned_[f];

        std::vector<std::uint32_t> remap(leaves * 2, std::numeric_limits<std::uint32_t>::max());
        std::vector<std::uint32_t> next_bits;
        for (std::size_t i = 0; i < col.size(); ++i) {
            const std::size_t slot = leaf_of_[i] * 2 + (col[i] > border ? 1 : 0);
            if (remap[slot] == std::numeric_limits<std::uint32_t>::max()) {
                remap[slot] = static_cast<std::uint32_t>(next_bits.size());
                next_bits.push_back(leaf_bits_[slot / 2] |
                                    (static_cast<std::uint32_t>(slot & 1) << level));
            }
            leaf_of_[i] = remap[slot];
        }
        leaf_bits_ = std::move(next_bits);
    }

    void finish_leaves(ObliviousTree& tree, const std::vector<std::vector<double>>& resid,
                       const TrainConfig& config) {
        const std::size_t live = leaf_bits_.size();
        std::vector<double> w(live, 0.0);
        std::vector<std::vector<double>> s(live, std::vector<double>(n_targets_, 0.0));
        for (std::size_t i = 0; i < leaf_of_.size(); ++i) {
            const std::size_t c = leaf_of_[i];
            w[c] += weights_[i];
            for (std::size_t d = 0; d < n_targets_; ++d) s[c][d] += weights_[i] * resid[i][d];
        }

        const std::size_t leaf_count = std::size_t{1} << tree.splits.size();
        tree.leaf_values.assign(leaf_count, std::vector<double>(n_targets_, 0.0));
        tree.leaf_weights.assign(leaf_count, 0.0);
        for (std::size_t c = 0; c < live; ++c) {
            tree.leaf_weights[leaf_bits_[c]] = w[c];
            if (w[c] < config.min_samples_leaf || w[c] <= 0.0) continue;
            for (std::size_t d = 0; d < n_targets_; ++d)
                tree.leaf_values[leaf_bits_[c]][d] = config.learning_rate * s[c][d] / w[c];
        }
    }

    const std::vector<std::vector<std::uint16_t>>& binned_;
    const std::vector<std::vector<double>>& borders_;
    const std::vector<std::size_t>& usable_;
    const std::vector<double>& weights_;
    std::size_t n_targets_;

    std::vector<std::uint32_t> leaf_of_;
    std::vector<std::uint32_t> leaf_bits_;
    std::vector<double> hist_w_, hist_s_, gain_;
};

GBDTModel train_impl(const Dataset& train_fold, const Dataset* valid_fold,
                     const TrainConfig& config) {
    check_train_config(config);
    if (train_fold.records.empty()) throw std::invalid_argument("empty training fold");
    if (valid_fold && valid_fold->schema.fingerprint() != train_fold.schema.fingerprint())
        throw std::invalid_argument("validation fold schema does not match training fold");

    const std::size_t n = train_fold.size();
    const std::size_t n_targets = train_fold.schema.n_targets();

    GBDTModel model;
    model.learning_rate = config.learning_rate;
    model.config = config;
    model.schema_fingerprint = train_fold.schema.fingerprint();
    model.base_prediction.assign(n_targets, 0.0);

    auto fit = fit_ordered_encoding(train_fold, 0, derive_seed(config.seed, rng_tag::kEncoding));
    model.encoder = std::move(fit.encoder);

    model.standardization.mean.assign(n_targets, 0.0);
    model.standardization.std.assign(n_targets, 1.0);
    for (std::size_t d = 0; d < n_targets; ++d) {
        double mean = 0.0;
        for (const auto& rec : train_fold.records) mean += rec.targets[d];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& rec : train_fold.records)
            var += (rec.targets[d] - mean) * (rec.targets[d] - mean);
        var /= static_cast<double>(n);
        model.standardization.mean[d] = mean;
        if (var > 0.0) model.standardization.std[d] = std::sqrt(var);
    }

    FoldView tr;
    tr.columns = std::move(fit.columns);
    tr.weights = fold_weights(train_fold);
    tr.weight_sum = 0.0;
    for (double w : tr.weights) tr.weight_sum += w;
    tr.y_std = standardize_targets(train_fold, model.standardization);

    model.borders.resize(train_fold.schema.n_features());
    std::vector<std::size_t> usable;
    for (std::size_t f = 0; f < tr.columns.size(); ++f) {
        model.borders[f] = compute_borders(tr.columns[f], config.max_borders);
        if (!model.borders[f].empty()) usable.push_back(f);
    }
    if (usable.empty() && n > 1) throw std::invalid_argument("no usable features");

    std::vector<std::vector<std::uint16_t>> binned(tr.columns.size());
    for (std::size_t f : usable) {
        binned[f].resize(n);
        for (std::size_t i = 0; i < n; ++i)
            binned[f][i] = static_cast<std::uint16_t>(bin_value(tr.columns[f][i], model.borders[f]));
    }

    auto resid = tr.y_std;
    model.error_trace.push_back(std_space_multirmse(resid, tr.weights, tr.weight_sum));

    FoldView va;
    std::vector<std::vector<double>> v_resid;
    const bool stopping =
        valid_fold && !valid_fold->records.empty() && config.early_stopping_rounds > 0;
    if (valid_fold) {
        va.columns = transform(model.encoder, *valid_fold);
        va.weights = fold_weights(*valid_fold);
        va.weight_sum = 0.0;
        for (double w : va.weights) va.weight_sum += w;
        v_resid = standardize_targets(*valid_fold, model.standardization);
    }
    double best_valid = valid_fold && !valid_fold->records.empty()
                            ? std_space_multirmse(v_resid, va.weights, va.weight_sum)
                            : 0.0;
    std::size_t best_trees = 0, stall = 0;

    TreeBuilder builder(binned, model.borders, usable, tr.weights, n_targets);
    for (std::size_t t = 0; t < config.n_estimators; ++t) {
        Rng tree_rng(derive_seed(config.seed, rng_tag::kTree, t));
        ObliviousTree tree = builder.build(resid, config, tree_rng);

        const auto& assignment = builder.leaf_assignment();
        const auto& bits = builder.leaf_bits();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& value = tree.leaf_values[bits[assignment[i]]];
            for (std::size_t d = 0; d < n_targets; ++d) resid[i][d] -= value[d];
        }
        model.error_trace.push_back(std_space_multirmse(resid, tr.weights, tr.weight_sum));
        model.trees.push_back(std::move(tree));

        if (valid_fold && !valid_fold->records.empty()) {
            const auto& added = model.trees.back();
            for (std::size_t i = 0; i < valid_fold->size(); ++i) {
                const auto& value = added.leaf_values[added.leaf_of(va.columns, i)];
                for (std::size_t d = 0; d < n_targets; ++d) v_resid[i][d] -= value[d];
            }
            if (stopping) {
                const double score = std_space_multirmse(v_resid, va.weights, va.weight_sum);
                if (score < best_valid - 1e-12) {
                    best_valid = score;
                    best_trees = model.trees.size();
                    stall = 0;
                } else if (++stall >= config.early_stopping_rounds) {
                    break;
                }
            }
        }
    }

    if (stopping) {
        model.trees.resize(best_trees);
        model.error_trace.resize(best_trees + 1);
    }
    return model;
}

void check_schema(const GBDTModel& model, const Dataset& dataset) {
    if (model.schema_fingerprint != dataset.schema.fingerprint())
        throw std::invalid_argument("dataset schema does not match the model");
}

}  // namespace

GBDTModel train(const Dataset& train_fold, const TrainConfig& config) {
    return train_impl(train_fold, nullptr, config);
}

GBDTModel train(const Dataset& train_fold, const Dataset& valid_fold, const TrainConfig& config) {
    return train_impl(train_fold, &valid_fold, config);
}

std::vector<std::vector<double>> predict(const GBDTModel& model, const Dataset& dataset) {
    check_schema(model, dataset);
    const auto columns = transform(model.encoder, dataset);
    const std::size_t d_count = model.n_targets();

    std::vector<std::vector<double>> out(dataset.size(), model.base_prediction);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (const auto& tree : model.trees) {
            const auto& value = tree.leaf_values[tree.leaf_of(columns, i)];
            for (std::size_t d = 0; d < d_count; ++d) out[i][d] += value[d];
        }
        for (std::size_t d = 0; d < d_count; ++d)
            out[i][d] = out[i][d] * model.standardization.std[d] + model.standardization.mean[d];
    }
    return out;
}

std::vector<std::vector<std::uint32_t>> apply_leaves(const GBDTModel& model,
                                                     const Dataset& dataset,
                                                     std::size_t threads) {
    check_schema(model, dataset);
    const auto columns = transform(model.encoder, dataset);
    std::vector<std::vector<std::uint32_t>> out(
        dataset.size(), std::vector<std::uint32_t>(model.trees.size(), 0));
    parallel_for(dataset.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t t = 0; t < model.trees.size(); ++t)
                out[i][t] = static_cast<std::uint32_t>(model.trees[t].leaf_of(columns, i));
    });
    return out;
}

TuneResult random_search_tune(const Dataset& train_fold, const Dataset& valid_fold,
                              const TuneSpace& space, std::size_t n_trials, std::uint64_t seed) {
    if (n_trials == 0) throw std::invalid_argument("n_trials must be at least 1");

    std::vector<std::vector<double>> valid_actual(valid_fold.size());
    for (std::size_t i = 0; i < valid_fold.size(); ++i)
        valid_actual[i] = valid_fold.records[i].targets;

    Rng rng(derive_seed(seed, rng_tag::kTune));
    TuneResult result;
    result.best_score = std::numeric_limits<double>::infinity();

    for (std::size_t trial = 0; trial < n_trials; ++trial) {
        TrainConfig config;
        const std::size_t est_steps =
            (space.estimators_hi - space.estimators_lo) / space.estimators_step + 1;
        config.n_estimators =
            space.estimators_lo + space.estimators_step * rng.uniform_int(est_steps);
        config.max_depth = std::min(
            space.depth_lo + rng.uniform_int(space.depth_hi - space.depth_lo + 1), space.depth_cap);
        const std::size_t ms_steps = static_cast<std::size_t>(
            (space.min_samples_hi - space.min_samples_lo) / space.min_samples_step) + 1;
        config.min_samples_leaf =
            space.min_samples_lo +
            space.min_samples_step * static_cast<double>(rng.uniform_int(ms_steps));
        config.learning_rate = rng.uniform(space.learning_rate_lo, space.learning_rate_hi);
        config.feature_fraction = rng.uniform(space.feature_fraction_lo, space.feature_fraction_hi);
        config.max_borders = space.max_borders;
        config.early_stopping_rounds = space.early_stopping_rounds;
        config.seed = derive_seed(seed, rng_tag::kTune, trial);

        GBDTModel model = train(train_fold, valid_fold, config);
        const double score = multirmse(predict(model, valid_fold), valid_actual,
                                       valid_fold.sample_weights);

        result.trials.push_back({config, score, model.trees.size()});
        if (score < result.best_score) {
            result.best_score = score;
            result.best = config;
        }
    }
    return result;
}

}  // namespace relval
