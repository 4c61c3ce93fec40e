#include "relval/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "relval/encoding.hpp"
#include "relval/rng.hpp"

namespace relval {

double DecisionTreeModel::predict_row(const std::vector<std::vector<double>>& columns,
                                      std::size_t row) const {
    return nodes[leaf_index(columns, row)].value;
}

std::size_t DecisionTreeModel::leaf_index(const std::vector<std::vector<double>>& columns,
                                          std::size_t row) const {
    std::size_t at = 0;
    while (nodes[at].feature >= 0)
        at = columns[static_cast<std::size_t>(nodes[at].feature)][row] > nodes[at].threshold
                 ? static_cast<std::size_t>(nodes[at].right)
                 : static_cast<std::size_t>(nodes[at].left);
    return at;
}

namespace {

struct CartContext {
    const std::vector<std::vector<std::uint16_t>>& binned;
    const std::vector<std::vector<double>>& borders;
    const std::vector<std::size_t>& usable;
    const std::vector<double>& y;
    const std::vector<double>& weights;
    const TreeConfig& config;
    std::vector<TreeNode>& nodes;
    Rng& rng;
};

std::vector<std::size_t> sample_node_features(const CartContext& ctx) {
    const std::size_t u = ctx.usable.size();
    std::size_t m = static_cast<std::size_t>(
        std::ceil(ctx.config.max_features * static_cast<double>(u)));
    m = std::min(std::max<std::size_t>(m, 1), u);
    std::vector<std::size_t> pool = ctx.usable;
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t k = j + static_cast<std::size_t>(ctx.rng.uniform_int(pool.size() - j));
        std::swap(pool[j], pool[k]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
}

// Grows the subtree for `rows` and returns its node index (preorder layout).
int grow(const CartContext& ctx, std::vector<std::size_t>& rows, std::size_t depth) {
    double w_total = 0.0, s_total = 0.0;
    for (std::size_t i : rows) {
        w_total += ctx.weights[i];
        s_total += ctx.weights[i] * ctx.y[i];
    }

    const int self = static_cast<int>(ctx.nodes.size());
    ctx.nodes.push_back(TreeNode{});
    ctx.nodes[static_cast<std::size_t>(self)].value = s_total / w_total;
    ctx.nodes[static_cast<std::size_t>(self)].cover = w_total;

    if (depth >= ctx.config.max_depth || rows.size() < 2 || ctx.usable.empty()) return self;

    bool pure = true;
    for (std::size_t i : rows)
        if (ctx.y[i] != ctx.y[rows[0]]) {
            pure = false;
            break;
        }
    if (pure) return self;

    // A zero-gain split on an impure node is still taken (the parts may split
    // further), so any valid candidate beats no split at all.
    const auto candidates = sample_node_features(ctx);
    double best_gain = -std::numeric_limits<double>::infinity();
    std::size_t best_feature = 0, best_border = 0;
    bool found = false;

    std::vector<double> hw, hs;
    for (std::size_t f : candidates) {
        const std::size_t bins = ctx.borders[f].size() + 1;
        hw.assign(bins, 0.0);
        hs.assign(bins, 0.0);
        for (std::size_t i : rows) {
            const std::size_t b = ctx.binned[f][i];
            hw[b] += ctx.weights[i];
            hs[b] += ctx.weights[i] * ctx.y[i];
        }
        double cw = 0.0, cs = 0.0;
        for (std::size_t j = 0; j + 1 < bins; ++j) {
            cw += hw[j];
            cs += hs[j];
            const double rw = w_total - cw, rs = s_total - cs;
            if (cw < ctx.config.min_samples_leaf || rw < ctx.config.min_samples_leaf) continue;
            if (cw <= 0.0 || rw <= 0.0) continue;
            const double gain = cs * cs / cw + rs * rs / rw - s_total * s_total / w_total;
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = f;
                best_border = j;
                found = true;
            }
        }
    }
    if (!found) return self;

    std::vector<std::size_t> left_rows, right_rows;
    left_rows.reserve(rows.size());
    for (std::size_t i : rows)
        (ctx.binned[best_feature][i] > best_border ? right_rows : left_rows).push_back(i);
    rows.clear();
    rows.shrink_to_fit();

    const int left = grow(ctx, left_rows, depth + 1);
    const int right = grow(ctx, right_rows, depth + 1);
    auto& node = ctx.nodes[static_cast<std::size_t>(self)];
    node.feature = static_cast<int>(best_feature);
    node.threshold = ctx.borders[best_feature][best_border];
    node.left = left;
    node.right = right;
    return self;
}

struct BinnedMatrix {
    std::vector<std::vector<std::uint16_t>> binned;
    std::vector<std::vector<double>> borders;
    std::vector<std::size_t> usable;
};

BinnedMatrix bin_matrix(const std::vector<std::vector<double>>& columns,
                        std::size_t max_borders) {
    BinnedMatrix out;
    out.binned.resize(columns.size());
    out.borders.resize(columns.size());
    for (std::size_t f = 0; f < columns.size(); ++f) {
        out.borders[f] = compute_borders(columns[f], max_borders);
        if (out.borders[f].empty()) continue;
        out.usable.push_back(f);
        out.binned[f].resize(columns[f].size());
        for (std::size_t i = 0; i < columns[f].size(); ++i)
            out.binned[f][i] = static_cast<std::uint16_t>(bin_value(columns[f][i], out.borders[f]));
    }
    return out;
}

void check_matrix(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                  const std::vector<double>& weights) {
    if (columns.empty() || y.empty()) throw std::invalid_argument("empty training fold");
    for (const auto& col : columns)
        if (col.size() != y.size()) throw std::invalid_argument("ragged feature matrix");
    if (!weights.empty() && weights.size() != y.size())
        throw std::invalid_argument("weight vector length does not match rows");
}

DecisionTreeModel cart_on(const BinnedMatrix& mat, const std::vector<double>& y,
                          const std::vector<double>& weights, std::vector<std::size_t> rows,
                          const TreeConfig& config, Rng& rng) {
    DecisionTreeModel model;
    CartContext ctx{mat.binned, mat.borders, mat.usable, y, weights, config, model.nodes, rng};
    grow(ctx, rows, 0);
    return model;
}

}  // namespace

DecisionTreeModel train_decision_tree(const std::vector<std::vector<double>>& columns,
                                      const std::vector<double>& y,
                                      const std::vector<double>& weights,
                                      const TreeConfig& config) {
    check_matrix(columns, y, weights);
    const std::vector<double> w = weights.empty() ? std::vector<double>(y.size(), 1.0) : weights;
    const auto mat = bin_matrix(columns, config.max_borders);

    std::vector<std::size_t> rows(y.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, rng_tag::kTree));
    return cart_on(mat, y, w, std::move(rows), config, rng);
}

double RandomForestModel::predict_row(const std::vector<std::vector<double>>& columns,
                                      std::size_t row) const {
    double acc = 0.0;
    for (const auto& tree : trees) acc += tree.predict_row(columns, row);
    return acc / static_cast<double>(trees.size());
}

RandomForestModel train_random_forest(const std::vector<std::vector<double>>& columns,
                                      const std::vector<double>& y,
                                      const std::vector<double>& weights,
                                      const ForestConfig& config) {
    check_matrix(columns, y, weights);
    if (config.n_estimators == 0) throw std::invalid_argument("forest needs at least one tree");
    const std::vector<double> base_w =
        weights.empty() ? std::vector<double>(y.size(), 1.0) : weights;
    const auto mat = bin_matrix(columns, config.max_borders);

    TreeConfig tree_config;
    tree_config.max_depth = config.max_depth;
    tree_config.min_samples_leaf = config.min_samples_leaf;
    tree_config.max_features = config.max_features;
    tree_config.max_borders = config.max_borders;

    RandomForestModel model;
    for (std::size_t t = 0; t < config.n_estimators; ++t) {
        Rng rng(derive_seed(config.seed, rng_tag::kForest, t));
        std::vector<std::size_t> rows;
        std::vector<double> w = base_w;
        if (config.bootstrap) {
            std::vector<double> counts(y.size(), 0.0);
            for (std::size_t i = 0; i < y.size(); ++i)
                counts[static_cast<std::size_t>(rng.uniform_int(y.size()))] += 1.0;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (counts[i] > 0.0) {
                    rows.push_back(i);
                    w[i] = base_w[i] * counts[i];
                }
        } else {
            rows.resize(y.size());
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        model.trees.push_back(cart_on(mat, y, w, std::move(rows), tree_config, rng));
    }
    return model;
}

std::vector<std::vector<std::uint32_t>> forest_leaves(
    const RandomForestModel& model, const std::vector<std::vector<double>>& columns) {
    const std::size_t n = columns.empty() ? 0 : columns[0].size();
    std::vector<std::vector<std::uint32_t>> out(n,
                                                std::vector<std::uint32_t>(model.trees.size(), 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < model.trees.size(); ++t)
            out[i][t] = static_cast<std::uint32_t>(model.trees[t].leaf_index(columns, i));
    return out;
}

double ElasticNetModel::predict_row(const std::vector<std::vector<double>>& columns,
                                    std::size_t row) const {
    double acc = intercept;
    for (std::size_t f = 0; f < coefficients.size(); ++f)
        if (feature_std[f] > 0.0)
            acc += coefficients[f] * (columns[f][row] - feature_mean[f]) / feature_std[f];
    return acc;
}

ElasticNetModel train_elastic_net(const std::vector<std::vector<double>>& columns,
                                  const std::vector<double>& y, const NetConfig& config) {
    check_matrix(columns, y, {});
    if (config.alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
    if (config.l1_ratio < 0.0 || config.l1_ratio > 1.0)
        throw std::invalid_argument("l1_ratio must lie in [0, 1]");

    const std::size_t n = y.size();
    const std::size_t p = columns.size();
    const double dn = static_cast<double>(n);

    ElasticNetModel model;
    model.alpha = config.alpha;
    model.l1_ratio = config.l1_ratio;
    model.feature_mean.assign(p, 0.0);
    model.feature_std.assign(p, 0.0);
    model.coefficients.assign(p, 0.0);

    std::vector<std::vector<double>> x(p, std::vector<double>(n, 0.0));
    for (std::size_t f = 0; f < p; ++f) {
        double mean = std::accumulate(columns[f].begin(), columns[f].end(), 0.0) / dn;
        double var = 0.0;
        for (double v : columns[f]) var += (v - mean) * (v - mean);
        var /= dn;
        model.feature_mean[f] = mean;
        model.feature_std[f] = var > 0.0 ? std::sqrt(var) : 0.0;
        if (model.feature_std[f] > 0.0)
            for (std::size_t i = 0; i < n; ++i)
                x[f][i] = (columns[f][i] - mean) / model.feature_std[f];
    }

    const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / dn;
    model.intercept = y_mean;
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - y_mean;

    const double l1 = config.alpha * config.l1_ratio;
    const double l2 = config.alpha * (1.0 - config.l1_ratio);

    model.converged = false;
    for (std::size_t sweep = 0; sweep < config.max_iter; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t f = 0; f < p; ++f) {
            if (model.feature_std[f] <= 0.0) continue;
            const double old = model.coefficients[f];
            double rho = 0.0, colsq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                rho += x[f][i] * (resid[i] + x[f][i] * old);
                colsq += x[f][i] * x[f][i];
            }
            rho /= dn;
            const double soft = std::abs(rho) > l1 ? (rho > 0 ? rho - l1 : rho + l1) : 0.0;
            const double next = soft / (colsq / dn + l2);
            if (next != old) {
                const double delta = next - old;
                for (std::size_t i = 0; i < n; ++i) resid[i] -= delta * x[f][i];
                model.coefficients[f] = next;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta < config.tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

}  // namespace relval
