#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "relval/baselines.hpp"

namespace relval {

using nlohmann::json;

namespace {

json nodes_json(const std::vector<TreeNode>& nodes) {
    json out = json::array();
    for (const auto& n : nodes)
        out.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.cover});
    return out;
}

std::vector<TreeNode> nodes_from_json(const json& j) {
    std::vector<TreeNode> nodes;
    for (const auto& row : j) {
        TreeNode n;
        n.feature = row.at(0).get<int>();
        n.threshold = row.at(1).get<double>();
        n.left = row.at(2).get<int>();
        n.right = row.at(3).get<int>();
        n.value = row.at(4).get<double>();
        n.cover = row.at(5).get<double>();
        nodes.push_back(n);
    }
    return nodes;
}

json parse_kind(const std::string& path, const char* kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    json doc = json::parse(in);
    if (doc.value("format", "") != kind)
        throw std::runtime_error("'" + path + "' is not a " + std::string(kind) + " file");
    return doc;
}

void dump(const json& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

}  // namespace

void save_decision_tree(const DecisionTreeModel& model, const std::string& path) {
    dump(json{{"format", "relval-dtree"}, {"version", 1}, {"nodes", nodes_json(model.nodes)}},
         path);
}

DecisionTreeModel load_decision_tree(const std::string& path) {
    json doc = parse_kind(path, "relval-dtree");
    DecisionTreeModel model;
    model.nodes = nodes_from_json(doc.at("nodes"));
    return model;
}

void save_random_forest(const RandomForestModel& model, const std::string& path) {
    json trees = json::array();
    for (const auto& tree : model.trees) trees.push_back(nodes_json(tree.nodes));
    dump(json{{"format", "relval-rf"}, {"version", 1}, {"trees", std::move(trees)}}, path);
}

RandomForestModel load_random_forest(const std::string& path) {
    json doc = parse_kind(path, "relval-rf");
    RandomForestModel model;
    for (const auto& jt : doc.at("trees")) {
        DecisionTreeModel tree;
        tree.nodes = nodes_from_json(jt);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

void save_elastic_net(const ElasticNetModel& model, const std::string& path) {
    dump(json{{"format", "relval-enet"},
              {"version", 1},
              {"coefficients", model.coefficients},
              {"intercept", model.intercept},
              {"feature_mean", model.feature_mean},
              {"feature_std", model.feature_std},
              {"alpha", model.alpha},
              {"l1_ratio", model.l1_ratio},
              {"converged", model.converged}},
         path);
}

ElasticNetModel load_elastic_net(const std::string& path) {
    json doc = parse_kind(path, "relval-enet");
    ElasticNetModel model;
    model.coefficients = doc.at("coefficients").get<std::vector<double>>();
    model.intercept = doc.at("intercept").get<double>();
    model.feature_mean = doc.at("feature_mean").get<std::vector<double>>();
    model.feature_std = doc.at("feature_std").get<std::vector<double>>();
    model.alpha = doc.at("alpha").get<double>();
    model.l1_ratio = doc.at("l1_ratio").get<double>();
    model.converged = doc.at("converged").get<bool>();
    return model;
}

}  // namespace relval
