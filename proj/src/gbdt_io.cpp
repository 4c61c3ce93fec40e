#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "relval/gbdt.hpp"

namespace relval {

using nlohmann::json;

namespace {

json config_json(const TrainConfig& config) {
    return json{{"n_estimators", config.n_estimators},
                {"max_depth", config.max_depth},
                {"max_borders", config.max_borders},
                {"min_samples_leaf", config.min_samples_leaf},
                {"learning_rate", config.learning_rate},
                {"feature_fraction", config.feature_fraction},
                {"seed", config.seed},
                {"early_stopping_rounds", config.early_stopping_rounds}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig config;
    config.n_estimators = j.at("n_estimators").get<std::size_t>();
    config.max_depth = j.at("max_depth").get<std::size_t>();
    config.max_borders = j.at("max_borders").get<std::size_t>();
    config.min_samples_leaf = j.at("min_samples_leaf").get<double>();
    config.learning_rate = j.at("learning_rate").get<double>();
    config.feature_fraction = j.at("feature_fraction").get<double>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.early_stopping_rounds = j.at("early_stopping_rounds").get<std::size_t>();
    return config;
}

}  // namespace

void save_model(const GBDTModel& model, const std::string& path) {
    json doc;
    doc["format"] = "relval-gbdt";
    doc["version"] = 1;
    doc["schema_fingerprint"] = model.schema_fingerprint;
    doc["learning_rate"] = model.learning_rate;
    doc["base_prediction"] = model.base_prediction;
    doc["standardization"] = {{"mean", model.standardization.mean},
                              {"std", model.standardization.std}};

    json stats = json::object();
    for (const auto& [feature, tokens] : model.encoder.stats) {
        json per_token = json::object();
        for (const auto& [token, ts] : tokens) per_token[token] = {ts.sum, ts.count};
        stats[std::to_string(feature)] = std::move(per_token);
    }
    doc["encoder"] = {{"prior", model.encoder.prior},
                      {"prior_weight", model.encoder.prior_weight},
                      {"seed", model.encoder.seed},
                      {"stats", std::move(stats)}};

    doc["borders"] = model.borders;
    doc["error_trace"] = model.error_trace;
    doc["config"] = config_json(model.config);

    json trees = json::array();
    for (const auto& tree : model.trees) {
        json splits = json::array();
        for (const auto& s : tree.splits) splits.push_back({s.feature, s.threshold});
        trees.push_back({{"splits", std::move(splits)},
                         {"leaf_values", tree.leaf_values},
                         {"leaf_weights", tree.leaf_weights}});
    }
    doc["trees"] = std::move(trees);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

GBDTModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    json doc = json::parse(in);
    if (doc.value("format", "") != "relval-gbdt")
        throw std::runtime_error("'" + path + "' is not a model file");
    if (doc.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported model version in '" + path + "'");

    GBDTModel model;
    model.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    model.base_prediction = doc.at("base_prediction").get<std::vector<double>>();
    model.standardization.mean =
        doc.at("standardization").at("mean").get<std::vector<double>>();
    model.standardization.std = doc.at("standardization").at("std").get<std::vector<double>>();

    const auto& enc = doc.at("encoder");
    model.encoder.prior = enc.at("prior").get<double>();
    model.encoder.prior_weight = enc.at("prior_weight").get<double>();
    model.encoder.seed = enc.at("seed").get<std::uint64_t>();
    for (const auto& [feature, tokens] : enc.at("stats").items()) {
        auto& per_token = model.encoder.stats[std::stoul(feature)];
        for (const auto& [token, ts] : tokens.items())
            per_token[token] = {ts.at(0).get<double>(), ts.at(1).get<std::uint64_t>()};
    }

    model.borders = doc.at("borders").get<std::vector<std::vector<double>>>();
    model.error_trace = doc.at("error_trace").get<std::vector<double>>();
    model.config = config_from_json(doc.at("config"));

    for (const auto& jt : doc.at("trees")) {
        ObliviousTree tree;
        for (const auto& js : jt.at("splits"))
            tree.splits.push_back({js.at(0).get<std::size_t>(), js.at(1).get<double>()});
        tree.leaf_values = jt.at("leaf_values").get<std::vector<std::vector<double>>>();
        tree.leaf_weights = jt.at("leaf_weights").get<std::vector<double>>();
        if (tree.leaf_values.size() != (std::size_t{1} << tree.splits.size()))
            throw std::runtime_error("corrupt tree in '" + path + "'");
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace relval
