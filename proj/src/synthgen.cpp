#include "relval/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "relval/csv.hpp"
#include "relval/rng.hpp"

namespace relval {

namespace {

const char* kStates[] = {"CA", "NY", "TX", "FL", "IL", "PA", "OH", "NJ", "MI", "GA",
                         "NC", "VA", "WA", "MA", "AZ", "IN", "TN", "MO", "MD", "WI",
                         "MN", "CO", "AL", "SC", "LA", "KY", "OR", "OK", "CT", "UT",
                         "IA", "NV", "AR", "MS", "KS", "NM", "NE", "ID", "WV", "HI",
                         "NH", "ME", "MT", "RI", "DE", "SD", "ND", "AK", "VT", "WY"};
const std::size_t kStateCount = sizeof(kStates) / sizeof(kStates[0]);

const char* kRatings[] = {"AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "BBB"};
const std::size_t kRatingCount = sizeof(kRatings) / sizeof(kRatings[0]);

const char* kSectors[] = {"GO_LOCAL", "EDUCATION", "HEALTH", "TRANSPORT", "UTILITY",
                          "HOUSING", "WATER", "POWER", "DEVELOPMENT", "LEASE"};

const char* kProceeds[] = {"SCHOOLS", "HIGHWAYS", "WATER_SEWER", "HOSPITALS",
                           "HOUSING", "AIRPORTS", "POWER", "PARKS", "REFUNDING",
                           "GENERAL", "TRANSIT", "STADIUM"};

std::string state_token(std::size_t index) {
    std::string token = kStates[index % kStateCount];
    if (index >= kStateCount) token += std::to_string(index / kStateCount + 1);
    return token;
}

double rating_score(const std::string& token) {
    for (std::size_t r = 0; r < kRatingCount; ++r)
        if (token == kRatings[r]) return static_cast<double>(r);
    return 4.0;
}

// Deterministic per-token additive level, uniform in [-amplitude, amplitude),
// derived from the token text so it survives save/load round trips.
double token_level(const std::string& token, double amplitude, std::uint64_t salt) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : token) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    h = splitmix64(h ^ splitmix64(salt));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return amplitude * (2.0 * u - 1.0);
}

void check_config(const GeneratorConfig& config) {
    if (config.n_bonds == 0 || config.n_states == 0 || config.trade_orders_per_day == 0 ||
        config.horizon_days == 0)
        throw std::invalid_argument("generator counts must be positive");
    if (config.noise_std_oas < 0 || config.noise_std_yield < 0 ||
        config.residual_std_yield < 0 || config.innovation_std_yield < 0)
        throw std::invalid_argument("noise levels must be nonnegative");
    if (config.reversion_half_life_days <= 0)
        throw std::invalid_argument("reversion half-life must be positive");
}

std::size_t feature_slot(const FeatureSchema& schema, const std::string& name) {
    int idx = schema.feature_index(name);
    if (idx < 0) throw std::invalid_argument("dataset lacks feature '" + name + "'");
    return static_cast<std::size_t>(idx);
}

}  // namespace

FeatureSchema bond_schema() {
    FeatureSchema schema;
    schema.features = {{"state", FeatureKind::Categorical, ""},
                       {"days_to_maturity", FeatureKind::Numerical, "days"},
                       {"age", FeatureKind::Numerical, "days"},
                       {"coupon", FeatureKind::Numerical, "percent"},
                       {"coupon_frequency", FeatureKind::Numerical, "per_year"},
                       {"bonds_by_obligor", FeatureKind::Numerical, "count"},
                       {"amount_issued", FeatureKind::Numerical, "usd"},
                       {"rating", FeatureKind::Categorical, ""},
                       {"time_to_call", FeatureKind::Numerical, "days"},
                       {"tax_status", FeatureKind::Categorical, ""},
                       {"sector", FeatureKind::Categorical, ""},
                       {"put_call", FeatureKind::Categorical, ""},
                       {"funding", FeatureKind::Categorical, ""},
                       {"deal_amount", FeatureKind::Numerical, "usd"},
                       {"use_of_proceeds", FeatureKind::Categorical, ""},
                       {"payment_frequency", FeatureKind::Categorical, ""}};
    schema.target_names = {"oas", "yield"};
    return schema;
}

// Feature distributions:
//   state              uniform over the first n_states tokens
//   days_to_maturity   log-uniform [30, 10950]
//   age                uniform [0, 7300]
//   coupon             uniform on the 1/8-point grid in [0, 8]
//   coupon_frequency   2 (80%), 4 (10%), 1 (10%)
//   bonds_by_obligor   round(log-uniform [1, 500])
//   amount_issued      log-uniform [1e5, 5e8]
//   rating             uniform over 8 ordinal tokens AAA..BBB
//   time_to_call       callable (65%): log-uniform [30, min(maturity, 3650)];
//                      otherwise equals days_to_maturity
//   tax_status         TAX_EXEMPT (80%), TAXABLE (15%), AMT (5%)
//   sector             uniform over 10 tokens
//   put_call           CALLABLE or BULLET, tied to the time_to_call draw
//   funding            GO (45%), REVENUE (45%), PREREFUNDED (10%)
//   deal_amount        amount_issued x uniform [1, 3]
//   use_of_proceeds    uniform over 12 tokens
//   payment_frequency  SEMIANNUAL (85%), ANNUAL (8%), MONTHLY (7%)
//   last trade offset  uniform integer [0, 365), absent for 5% of bonds
Dataset generate_universe(const GeneratorConfig& config) {
    check_config(config);
    Dataset ds;
    ds.schema = bond_schema();
    ds.records.reserve(config.n_bonds);

    Rng rng(derive_seed(config.seed, rng_tag::kUniverse));
    for (std::size_t i = 0; i < config.n_bonds; ++i) {
        BondRecord rec;
        rec.id = "B" + std::string(6 - std::min<std::size_t>(6, std::to_string(i).size()), '0') +
                 std::to_string(i);
        rec.feature_num.assign(ds.schema.n_features(), 0.0);
        rec.feature_cat.assign(ds.schema.n_features(), "");

        auto set_num = [&](std::size_t f, double v) { rec.feature_num[f] = v; };
        auto set_cat = [&](std::size_t f, std::string v) { rec.feature_cat[f] = std::move(v); };

        set_cat(0, state_token(rng.uniform_int(config.n_states)));
        const double maturity = std::exp(rng.uniform(std::log(30.0), std::log(10950.0)));
        set_num(1, maturity);
        set_num(2, rng.uniform(0.0, 7300.0));
        set_num(3, std::round(rng.uniform(0.0, 8.0) * 8.0) / 8.0);
        const double uf = rng.uniform01();
        set_num(4, uf < 0.8 ? 2.0 : (uf < 0.9 ? 4.0 : 1.0));
        set_num(5, std::round(std::exp(rng.uniform(0.0, std::log(500.0)))));
        const double issued = std::exp(rng.uniform(std::log(1e5), std::log(5e8)));
        set_num(6, issued);
        set_cat(7, kRatings[rng.uniform_int(kRatingCount)]);
        const bool callable = rng.uniform01() < 0.65;
        set_num(8, callable
                       ? std::exp(rng.uniform(std::log(30.0), std::log(std::min(maturity, 3650.0))))
                       : maturity);
        const double ut = rng.uniform01();
        set_cat(9, ut < 0.8 ? "TAX_EXEMPT" : (ut < 0.95 ? "TAXABLE" : "AMT"));
        set_cat(10, kSectors[rng.uniform_int(10)]);
        set_cat(11, callable ? "CALLABLE" : "BULLET");
        const double ug = rng.uniform01();
        set_cat(12, ug < 0.45 ? "GO" : (ug < 0.9 ? "REVENUE" : "PREREFUNDED"));
        set_num(13, issued * rng.uniform(1.0, 3.0));
        set_cat(14, kProceeds[rng.uniform_int(12)]);
        const double up = rng.uniform01();
        set_cat(15, up < 0.85 ? "SEMIANNUAL" : (up < 0.93 ? "ANNUAL" : "MONTHLY"));

        if (rng.uniform01() < 0.95)
            rec.last_trade_offset_days = static_cast<int>(rng.uniform_int(365));

        rec.targets = {0.0, 0.0};
        rec.duration = 0.0;
        rec.dxs = 0.0;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

// Signal surfaces (maturity m in years, call c in years, rating score r with
// AAA = 0 .. BBB = 7):
//   fair_oas = 30 + 12 r^1.25 + 6 sqrt(m) + 2.2 r sqrt(m)
//            + state level (+-15) + sector level (+-10)
//            + 5 tanh((coupon - 4) / 2) + 8 exp(-c / 5) [callable only]
//            - 2 ln(1 + amount_issued / 1e7)
//            + 1.5 tanh((age_years - 5) / 5)
//            + 6 [TAXABLE] + 3 [AMT]
//   fair_yield = 1 + 2.2 ln(1 + m) / ln(31) + 0.009 fair_oas
//              + 0.35 tanh((coupon - 4.5) / 1.5) + 0.15 [TAXABLE]
//   duration = m / (1 + coupon/100 * m / 4); dxs = duration * oas
GeneratedTargets generate_targets(const Dataset& universe, const GeneratorConfig& config) {
    check_config(config);
    const auto& schema = universe.schema;
    const std::size_t f_state = feature_slot(schema, "state");
    const std::size_t f_maturity = feature_slot(schema, "days_to_maturity");
    const std::size_t f_age = feature_slot(schema, "age");
    const std::size_t f_coupon = feature_slot(schema, "coupon");
    const std::size_t f_issued = feature_slot(schema, "amount_issued");
    const std::size_t f_rating = feature_slot(schema, "rating");
    const std::size_t f_call = feature_slot(schema, "time_to_call");
    const std::size_t f_tax = feature_slot(schema, "tax_status");
    const std::size_t f_sector = feature_slot(schema, "sector");
    const std::size_t f_putcall = feature_slot(schema, "put_call");

    GeneratedTargets out;
    out.dataset = universe;
    out.fair_oas.reserve(universe.size());
    out.fair_yield.reserve(universe.size());

    Rng rng(derive_seed(config.seed, rng_tag::kTargets));
    for (auto& rec : out.dataset.records) {
        const double m = rec.feature_num[f_maturity] / 365.25;
        const double age_y = rec.feature_num[f_age] / 365.25;
        const double coupon = rec.feature_num[f_coupon];
        const double r = rating_score(rec.feature_cat[f_rating]);
        const double call_y = rec.feature_num[f_call] / 365.25;
        const bool callable = rec.feature_cat[f_putcall] == "CALLABLE";
        const std::string& tax = rec.feature_cat[f_tax];

        double oas = 30.0 + 12.0 * std::pow(r, 1.25) + 6.0 * std::sqrt(m) +
                     2.2 * r * std::sqrt(m) +
                     token_level(rec.feature_cat[f_state], 15.0, 0xA1) +
                     token_level(rec.feature_cat[f_sector], 10.0, 0xB2) +
                     5.0 * std::tanh((coupon - 4.0) / 2.0) -
                     2.0 * std::log(1.0 + rec.feature_num[f_issued] / 1e7) +
                     1.5 * std::tanh((age_y - 5.0) / 5.0);
        if (callable) oas += 8.0 * std::exp(-call_y / 5.0);
        if (tax == "TAXABLE") oas += 6.0;
        else if (tax == "AMT") oas += 3.0;

        const double yld = 1.0 + 2.2 * std::log(1.0 + m) / std::log(31.0) + 0.009 * oas +
                           0.35 * std::tanh((coupon - 4.5) / 1.5) +
                           (tax == "TAXABLE" ? 0.15 : 0.0);

        out.fair_oas.push_back(oas);
        out.fair_yield.push_back(yld);

        rec.targets[0] = oas + (config.noise_std_oas > 0
                                    ? rng.normal(0.0, config.noise_std_oas)
                                    : 0.0);
        rec.targets[1] = yld + (config.noise_std_yield > 0
                                    ? rng.normal(0.0, config.noise_std_yield)
                                    : 0.0);
        rec.duration = m / (1.0 + coupon / 100.0 * m / 4.0);
        rec.dxs = rec.duration * rec.targets[0];
    }
    return out;
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size() - 1);
}

double noise_for_target_r2(const std::vector<double>& signal, double r2) {
    if (r2 <= 0.0 || r2 > 1.0) throw std::invalid_argument("target r2 must lie in (0, 1]");
    return std::sqrt(sample_variance(signal) * (1.0 - r2) / r2);
}

double reversion_factor(double half_life_days, double days) {
    return std::pow(2.0, -days / half_life_days);
}

MarketPath generate_paths(const GeneratedTargets& targets, const GeneratorConfig& config) {
    check_config(config);
    const std::size_t n = targets.dataset.size();
    if (targets.fair_yield.size() != n)
        throw std::invalid_argument("targets missing fair yield values");

    MarketPath path;
    path.bond_ids.reserve(n);
    for (const auto& rec : targets.dataset.records) path.bond_ids.push_back(rec.id);
    path.yields.assign(n, std::vector<double>(config.horizon_days, 0.0));
    path.residuals.assign(n, std::vector<double>(config.horizon_days, 0.0));

    const double phi = reversion_factor(config.reversion_half_life_days, 1.0);
    Rng rng(derive_seed(config.seed, rng_tag::kPaths));

    std::vector<double> resid(n);
    for (std::size_t b = 0; b < n; ++b)
        resid[b] = config.residual_std_yield > 0 ? rng.normal(0.0, config.residual_std_yield) : 0.0;

    for (std::size_t day = 0; day < config.horizon_days; ++day) {
        for (std::size_t b = 0; b < n; ++b) {
            if (day > 0) {
                resid[b] *= phi;
                if (config.innovation_std_yield > 0)
                    resid[b] += rng.normal(0.0, config.innovation_std_yield);
            }
            path.residuals[b][day] = resid[b];
            path.yields[b][day] = targets.fair_yield[b] + resid[b];
        }
    }
    return path;
}

TradeOrderBook generate_orders(const Dataset& dataset, const GeneratorConfig& config) {
    check_config(config);
    const std::size_t n = dataset.size();
    if (config.trade_orders_per_day > n)
        throw std::invalid_argument("trade_orders_per_day exceeds universe size");

    TradeOrderBook book;
    book.days.resize(config.horizon_days);
    std::vector<std::size_t> pool(n);
    for (std::size_t day = 0; day < config.horizon_days; ++day) {
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        Rng rng(derive_seed(config.seed, rng_tag::kOrders, day));
        // partial Fisher-Yates: the first m slots become the day's sample
        for (std::size_t j = 0; j < config.trade_orders_per_day; ++j) {
            const std::size_t k = j + static_cast<std::size_t>(rng.uniform_int(n - j));
            std::swap(pool[j], pool[k]);
        }
        book.days[day].assign(pool.begin(),
                              pool.begin() + static_cast<std::ptrdiff_t>(config.trade_orders_per_day));
    }
    return book;
}

void save_paths(const MarketPath& paths, const std::string& csv_path) {
    csv::Writer out(csv_path);
    out.row({"bond_id", "day", "yield"});
    for (std::size_t b = 0; b < paths.bond_ids.size(); ++b)
        for (std::size_t day = 0; day < paths.yields[b].size(); ++day)
            out.row({paths.bond_ids[b], std::to_string(day),
                     csv::format_double(paths.yields[b][day])});
}

MarketPath load_paths(const std::string& csv_path) {
    const auto table = csv::read_file(csv_path);
    if (table.header != std::vector<std::string>{"bond_id", "day", "yield"})
        throw std::runtime_error("'" + csv_path + "' is not a path file");

    MarketPath path;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& row : table.rows) {
        if (row.size() != 3) throw std::runtime_error("malformed path row");
        auto it = index.find(row[0]);
        if (it == index.end()) {
            it = index.emplace(row[0], path.bond_ids.size()).first;
            path.bond_ids.push_back(row[0]);
            path.yields.emplace_back();
        }
        const std::size_t day = static_cast<std::size_t>(std::stoul(row[1]));
        auto& series = path.yields[it->second];
        if (series.size() != day) throw std::runtime_error("path days out of order for " + row[0]);
        series.push_back(csv::parse_double(row[2]));
    }
    for (const auto& series : path.yields)
        if (series.size() != path.yields.front().size())
            throw std::runtime_error("ragged path series");
    return path;
}

void save_orders(const TradeOrderBook& book, const Dataset& dataset, const std::string& csv_path) {
    csv::Writer out(csv_path);
    out.row({"day", "bond_id"});
    for (std::size_t day = 0; day < book.days.size(); ++day)
        for (std::size_t idx : book.days[day])
            out.row({std::to_string(day), dataset.records.at(idx).id});
}

TradeOrderBook load_orders(const std::string& csv_path, const Dataset& dataset) {
    const auto table = csv::read_file(csv_path);
    if (table.header != std::vector<std::string>{"day", "bond_id"})
        throw std::runtime_error("'" + csv_path + "' is not an order book file");

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dataset.size(); ++i) index.emplace(dataset.records[i].id, i);

    TradeOrderBook book;
    for (const auto& row : table.rows) {
        if (row.size() != 2) throw std::runtime_error("malformed order row");
        const std::size_t day = static_cast<std::size_t>(std::stoul(row[0]));
        if (day >= book.days.size()) book.days.resize(day + 1);
        auto it = index.find(row[1]);
        if (it == index.end()) throw std::runtime_error("order references unknown bond " + row[1]);
        book.days[day].push_back(it->second);
    }
    return book;
}

}  // namespace relval
