#include "relval/explain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "relval/csv.hpp"
#include "relval/parallel.hpp"

namespace relval {

namespace {

constexpr std::size_t kMaxPath = 16;  // depth cap 12 plus root slack

struct PathElem {
    int feature = -1;
    double zero_frac = 0.0;  // share of paths flowing here when the feature is absent
    double one_frac = 0.0;   // 1 when the feature is present and the record follows this arc
    double weight = 0.0;
};

/// Fixed-capacity copy of the classic subset-permutation path, so recursion
/// never touches the heap.
struct PathBuf {
    std::array<PathElem, kMaxPath> elems;
    std::size_t len = 0;
};

void extend(PathBuf& m, double pz, double po, int pi) {
    const std::size_t l = m.len;
    m.elems[l] = {pi, pz, po, l == 0 ? 1.0 : 0.0};
    m.len = l + 1;
    for (std::size_t i = l; i-- > 0;) {
        m.elems[i + 1].weight +=
            po * m.elems[i].weight * static_cast<double>(i + 1) / static_cast<double>(l + 1);
        m.elems[i].weight =
            pz * m.elems[i].weight * static_cast<double>(l - i) / static_cast<double>(l + 1);
    }
}

void unwind(PathBuf& m, std::size_t i) {
    const std::size_t l = m.len - 1;
    double n = m.elems[l].weight;
    for (std::size_t j = l; j-- > 0;) {
        if (m.elems[i].one_frac != 0.0) {
            const double t = m.elems[j].weight;
            m.elems[j].weight = n * static_cast<double>(l + 1) /
                                (static_cast<double>(j + 1) * m.elems[i].one_frac);
            n = t - m.elems[j].weight * m.elems[i].zero_frac * static_cast<double>(l - j) /
                        static_cast<double>(l + 1);
        } else {
            m.elems[j].weight = m.elems[j].weight * static_cast<double>(l + 1) /
                                (m.elems[i].zero_frac * static_cast<double>(l - j));
        }
    }
    for (std::size_t j = i; j < l; ++j) {
        m.elems[j].feature = m.elems[j + 1].feature;
        m.elems[j].zero_frac = m.elems[j + 1].zero_frac;
        m.elems[j].one_frac = m.elems[j + 1].one_frac;
    }
    m.len = l;
}

double unwound_weight_sum(const PathBuf& m, std::size_t i) {
    PathBuf tmp = m;
    unwind(tmp, i);
    double acc = 0.0;
    for (std::size_t j = 0; j < tmp.len; ++j) acc += tmp.elems[j].weight;
    return acc;
}

/// Node covers of the implied binary tree; level L node `prefix` aggregates
/// every leaf whose low L bits equal the prefix.
std::vector<std::vector<double>> node_covers(const ObliviousTree& tree) {
    std::vector<std::vector<double>> covers(tree.depth() + 1);
    covers[tree.depth()] = tree.leaf_weights;
    for (std::size_t level = tree.depth(); level-- > 0;) {
        covers[level].assign(std::size_t{1} << level, 0.0);
        for (std::size_t p = 0; p < covers[level].size(); ++p)
            covers[level][p] =
                covers[level + 1][p] + covers[level + 1][p | (std::size_t{1} << level)];
    }
    return covers;
}

struct ShapContext {
    const ObliviousTree& tree;
    const std::vector<std::vector<double>>& covers;
    const std::vector<double>& row_values;  // one value per feature for this record
    std::vector<std::vector<double>>& phi;  // [feature][dim], standardized space
};

void recurse(const ShapContext& ctx, std::size_t level, std::size_t prefix, PathBuf m,
             double pz, double po, int pi) {
    extend(m, pz, po, pi);

    if (level == ctx.tree.depth()) {
        const auto& value = ctx.tree.leaf_values[prefix];
        for (std::size_t i = 1; i < m.len; ++i) {
            const double scale =
                unwound_weight_sum(m, i) * (m.elems[i].one_frac - m.elems[i].zero_frac);
            auto& target = ctx.phi[static_cast<std::size_t>(m.elems[i].feature)];
            for (std::size_t d = 0; d < value.size(); ++d) target[d] += scale * value[d];
        }
        return;
    }

    const auto& split = ctx.tree.splits[level];
    const std::size_t right = prefix | (std::size_t{1} << level);
    const bool goes_right = ctx.row_values[split.feature] > split.threshold;
    const std::size_t hot = goes_right ? right : prefix;
    const std::size_t cold = goes_right ? prefix : right;

    const double r_node = ctx.covers[level][prefix];
    const double r_hot = ctx.covers[level + 1][hot];
    const double r_cold = ctx.covers[level + 1][cold];

    double iz = 1.0, io = 1.0;
    for (std::size_t j = 1; j < m.len; ++j)
        if (m.elems[j].feature == static_cast<int>(split.feature)) {
            iz = m.elems[j].zero_frac;
            io = m.elems[j].one_frac;
            unwind(m, j);
            break;
        }

    // Empty branches carry no training mass; their conditional expectation is
    // taken as zero, matching the subset-enumeration oracle.
    if (r_hot > 0.0)
        recurse(ctx, level + 1, hot, m, iz * r_hot / r_node, io,
                static_cast<int>(split.feature));
    if (r_cold > 0.0)
        recurse(ctx, level + 1, cold, m, iz * r_cold / r_node, 0.0,
                static_cast<int>(split.feature));
}

void check_model(const GBDTModel& model) {
    for (const auto& tree : model.trees) {
        if (tree.leaf_weights.size() != tree.leaf_count())
            throw std::invalid_argument("covers required for attribution");
        if (tree.depth() + 2 > kMaxPath)
            throw std::invalid_argument("tree too deep for attribution");
    }
}

}  // namespace

Attribution tree_shap(const GBDTModel& model, const Dataset& records, std::size_t threads) {
    if (model.schema_fingerprint != records.schema.fingerprint())
        throw std::invalid_argument("dataset schema does not match the model");
    check_model(model);

    const std::size_t n_features = records.schema.features.size();
    const std::size_t n_dims = model.n_targets();

    Attribution out;
    for (const auto& feature : records.schema.features) out.feature_names.push_back(feature.name);
    out.target_names = records.schema.target_names;
    for (const auto& rec : records.records) out.record_ids.push_back(rec.id);

    out.base = model.base_prediction;
    for (const auto& tree : model.trees) {
        double total = 0.0;
        for (double w : tree.leaf_weights) total += w;
        if (total <= 0.0) continue;
        for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf)
            for (std::size_t d = 0; d < n_dims; ++d)
                out.base[d] += tree.leaf_weights[leaf] / total * tree.leaf_values[leaf][d];
    }
    for (std::size_t d = 0; d < n_dims; ++d)
        out.base[d] =
            out.base[d] * model.standardization.std[d] + model.standardization.mean[d];

    const auto columns = transform(model.encoder, records);
    out.phi.assign(records.size(),
                   std::vector<std::vector<double>>(n_features, std::vector<double>(n_dims, 0.0)));

    std::vector<std::vector<std::vector<double>>> covers;
    covers.reserve(model.trees.size());
    for (const auto& tree : model.trees) covers.push_back(node_covers(tree));

    parallel_for(records.size(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> row_values(n_features, 0.0);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t f = 0; f < n_features; ++f) row_values[f] = columns[f][i];
            for (std::size_t t = 0; t < model.trees.size(); ++t) {
                if (covers[t][0][0] <= 0.0) continue;
                ShapContext ctx{model.trees[t], covers[t], row_values, out.phi[i]};
                recurse(ctx, 0, 0, PathBuf{}, 1.0, 1.0, -1);
            }
        }
    });
    for (auto& record : out.phi)
        for (auto& per_feature : record)
            for (std::size_t d = 0; d < n_dims; ++d)
                per_feature[d] *= model.standardization.std[d];
    return out;
}

std::vector<std::pair<std::string, double>> global_importance(const Attribution& attribution,
                                                              std::size_t dim) {
    if (attribution.record_ids.empty())
        throw std::invalid_argument("attribution holds no records");
    if (dim >= attribution.base.size()) throw std::out_of_range("target dimension out of range");

    std::vector<std::pair<std::string, double>> ranking;
    for (std::size_t f = 0; f < attribution.feature_names.size(); ++f) {
        double acc = 0.0;
        for (const auto& record : attribution.phi) acc += std::abs(record[f][dim]);
        ranking.emplace_back(attribution.feature_names[f],
                             acc / static_cast<double>(attribution.phi.size()));
    }
    std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranking;
}

void write_attribution_csv(const std::string& path, const Attribution& attribution,
                           const std::string& provenance) {
    csv::Writer out(path);
    if (!provenance.empty()) out.comment(provenance);
    out.row({"record_id", "feature", "target_dim", "phi"});
    for (std::size_t i = 0; i < attribution.record_ids.size(); ++i)
        for (std::size_t f = 0; f < attribution.feature_names.size(); ++f)
            for (std::size_t d = 0; d < attribution.base.size(); ++d)
                out.row({attribution.record_ids[i], attribution.feature_names[f],
                         attribution.target_names[d],
                         csv::format_double(attribution.phi[i][f][d])});
}

void write_importance_json(const std::string& path, const Attribution& attribution,
                           const std::string& provenance) {
    nlohmann::json dims = nlohmann::json::array();
    for (std::size_t d = 0; d < attribution.base.size(); ++d) {
        nlohmann::json ranking = nlohmann::json::array();
        for (const auto& [feature, value] : global_importance(attribution, d))
            ranking.push_back({{"feature", feature}, {"mean_abs_phi", value}});
        dims.push_back({{"target", attribution.target_names[d]},
                        {"base", attribution.base[d]},
                        {"ranking", std::move(ranking)}});
    }
    nlohmann::json doc{{"format", "relval-importance"}, {"version", 1}, {"targets", std::move(dims)}};
    if (!provenance.empty()) doc["provenance"] = provenance;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

}  // namespace relval
