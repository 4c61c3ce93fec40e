#include "relval/dataset_io.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "relval/csv.hpp"

namespace relval {

using nlohmann::json;

std::string tool_version() { return "0.1.0"; }

std::string digest_string(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

namespace {

json provenance_json(const Provenance& prov) {
    return json{{"config_digest", prov.config_digest},
                {"seed", prov.seed},
                {"tool_version", prov.tool_version.empty() ? tool_version() : prov.tool_version}};
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& csv_path,
                  const std::string& sidecar_path, const Provenance& prov) {
    const auto& schema = dataset.schema;

    csv::Writer out(csv_path);
    out.comment("relval dataset config_digest=" + prov.config_digest +
                " seed=" + std::to_string(prov.seed) + " version=" + tool_version());
    std::vector<std::string> header{"id"};
    for (const auto& f : schema.features) header.push_back(f.name);
    for (const auto& t : schema.target_names) header.push_back(t);
    header.push_back("duration");
    header.push_back("dxs");
    header.push_back("last_trade_offset_days");
    out.row(header);

    std::vector<std::string> row;
    for (const auto& rec : dataset.records) {
        row.clear();
        row.push_back(rec.id);
        for (std::size_t f = 0; f < schema.n_features(); ++f)
            row.push_back(schema.is_numerical(f) ? csv::format_double(rec.feature_num[f])
                                                 : rec.feature_cat[f]);
        for (std::size_t d = 0; d < schema.n_targets(); ++d)
            row.push_back(csv::format_double(rec.targets[d]));
        row.push_back(csv::format_double(rec.duration));
        row.push_back(csv::format_double(rec.dxs));
        row.push_back(rec.last_trade_offset_days ? std::to_string(*rec.last_trade_offset_days) : "");
        out.row(row);
    }

    json sidecar;
    sidecar["format"] = "relval-dataset";
    sidecar["version"] = 1;
    sidecar["provenance"] = provenance_json(prov);
    sidecar["features"] = json::array();
    for (const auto& f : schema.features)
        sidecar["features"].push_back(json{{"name", f.name},
                                           {"kind", f.kind == FeatureKind::Numerical ? "numerical" : "categorical"},
                                           {"unit", f.unit}});
    sidecar["targets"] = schema.target_names;
    sidecar["fingerprint"] = schema.fingerprint();

    std::ofstream side(sidecar_path, std::ios::binary);
    if (!side) throw std::runtime_error("cannot write '" + sidecar_path + "'");
    side << sidecar.dump(2) << "\n";
}

Dataset load_dataset(const std::string& csv_path, const std::string& sidecar_path) {
    std::ifstream side(sidecar_path, std::ios::binary);
    if (!side) throw std::runtime_error("cannot open '" + sidecar_path + "'");
    json sidecar = json::parse(side);
    if (sidecar.value("format", "") != "relval-dataset")
        throw std::runtime_error("'" + sidecar_path + "' is not a dataset sidecar");

    Dataset dataset;
    for (const auto& f : sidecar.at("features")) {
        FeatureDef def;
        def.name = f.at("name").get<std::string>();
        const std::string kind = f.at("kind").get<std::string>();
        if (kind == "numerical") def.kind = FeatureKind::Numerical;
        else if (kind == "categorical") def.kind = FeatureKind::Categorical;
        else throw std::runtime_error("unknown feature kind '" + kind + "'");
        def.unit = f.value("unit", "");
        dataset.schema.features.push_back(std::move(def));
    }
    dataset.schema.target_names = sidecar.at("targets").get<std::vector<std::string>>();

    const auto table = csv::read_file(csv_path);
    const auto& schema = dataset.schema;
    const std::size_t expected = 1 + schema.n_features() + schema.n_targets() + 3;
    if (table.header.size() != expected)
        throw std::runtime_error("dataset CSV header does not match sidecar schema");

    dataset.records.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (row.size() != expected)
            throw std::runtime_error("dataset CSV row with " + std::to_string(row.size()) +
                                     " fields, expected " + std::to_string(expected));
        BondRecord rec;
        std::size_t col = 0;
        rec.id = row[col++];
        rec.feature_num.assign(schema.n_features(), 0.0);
        rec.feature_cat.assign(schema.n_features(), "");
        for (std::size_t f = 0; f < schema.n_features(); ++f, ++col) {
            if (schema.is_numerical(f)) rec.feature_num[f] = csv::parse_double(row[col]);
            else rec.feature_cat[f] = row[col].empty() ? kMissingToken : row[col];
        }
        rec.targets.resize(schema.n_targets());
        for (std::size_t d = 0; d < schema.n_targets(); ++d, ++col)
            rec.targets[d] = csv::parse_double(row[col]);
        rec.duration = csv::parse_double(row[col++]);
        rec.dxs = csv::parse_double(row[col++]);
        if (!row[col].empty()) rec.last_trade_offset_days = std::stoi(row[col]);
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

}  // namespace relval
