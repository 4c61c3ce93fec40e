#include "relval/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "relval/rng.hpp"

namespace relval {

int FeatureSchema::feature_index(const std::string& name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
        if (features[i].name == name) return static_cast<int>(i);
    return -1;
}

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xCBF29CE484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

}  // namespace

std::string FeatureSchema::fingerprint() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& f : features) {
        h = fnv1a(f.name, h);
        h = fnv1a(f.kind == FeatureKind::Numerical ? ":num;" : ":cat;", h);
    }
    h = fnv1a("|", h);
    for (const auto& t : target_names) h = fnv1a(t + ";", h);
    return hex64(h);
}

std::vector<std::string> validate_dataset(const Dataset& dataset) {
    std::vector<std::string> violations;
    const auto& schema = dataset.schema;

    if (schema.features.empty()) violations.push_back("schema: no features declared");
    std::set<std::string> names;
    for (const auto& f : schema.features) {
        if (!names.insert(f.name).second)
            violations.push_back("schema: duplicate feature name '" + f.name + "'");
    }
    for (const auto& t : schema.target_names) {
        if (names.count(t))
            violations.push_back("schema: target '" + t + "' collides with a feature name");
    }

    for (const auto& rec : dataset.records) {
        if (rec.feature_num.size() != schema.n_features() ||
            rec.feature_cat.size() != schema.n_features()) {
            violations.push_back("record " + rec.id + ": feature vector length does not match schema");
            continue;
        }
        for (std::size_t f = 0; f < schema.n_features(); ++f) {
            if (schema.is_numerical(f)) {
                if (!std::isfinite(rec.feature_num[f]))
                    violations.push_back("record " + rec.id + ": non-finite value for feature '" +
                                         schema.features[f].name + "'");
            } else if (rec.feature_cat[f].empty()) {
                violations.push_back("record " + rec.id + ": empty token for feature '" +
                                     schema.features[f].name + "'");
            }
        }
        if (rec.targets.size() != schema.n_targets()) {
            violations.push_back("record " + rec.id + ": target vector length does not match schema");
        } else {
            for (std::size_t d = 0; d < rec.targets.size(); ++d)
                if (!std::isfinite(rec.targets[d]))
                    violations.push_back("record " + rec.id + ": non-finite target '" +
                                         schema.target_names[d] + "'");
        }
        if (!std::isfinite(rec.duration) || !std::isfinite(rec.dxs)) {
            violations.push_back("record " + rec.id + ": non-finite risk field");
        } else if (rec.targets.size() >= 1 && rec.duration != 0.0) {
            const double expect = rec.duration * rec.targets[0];
            const double scale = std::max({std::fabs(expect), std::fabs(rec.dxs), 1.0});
            if (std::fabs(rec.dxs - expect) > 1e-9 * scale)
                violations.push_back("record " + rec.id + ": dxs does not equal duration * oas");
        }
        if (rec.last_trade_offset_days && *rec.last_trade_offset_days < 0)
            violations.push_back("record " + rec.id + ": negative last_trade_offset_days");
    }

    if (dataset.has_weights()) {
        if (dataset.sample_weights.size() != dataset.records.size()) {
            violations.push_back("weights: length " + std::to_string(dataset.sample_weights.size()) +
                                 " does not match record count " + std::to_string(dataset.records.size()));
        } else {
            for (std::size_t i = 0; i < dataset.sample_weights.size(); ++i)
                if (!(dataset.sample_weights[i] > 0.0) || !std::isfinite(dataset.sample_weights[i]))
                    violations.push_back("weights: nonpositive weight at index " + std::to_string(i));
        }
    }
    return violations;
}

SplitIndices split_dataset(const Dataset& dataset, std::uint64_t seed,
                           const SplitFractions& fractions) {
    const std::size_t n = dataset.size();
    if (n < 3) throw std::invalid_argument("too few records to split");
    if (!(fractions.train > 0.0 && fractions.valid > 0.0 && fractions.test > 0.0))
        throw std::invalid_argument("split fractions must be positive");
    const double sum = fractions.train + fractions.valid + fractions.test;
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, rng_tag::kSplit));
    rng.shuffle(order);

    std::size_t n_train = static_cast<std::size_t>(std::floor(fractions.train * static_cast<double>(n)));
    const std::size_t n_valid = static_cast<std::size_t>(std::floor(fractions.valid * static_cast<double>(n)));
    const std::size_t n_test = static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(n)));
    n_train += n - (n_train + n_valid + n_test);  // remainder to train

    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                     order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), order.end());
    return out;
}

double percentile(std::vector<double> sample, double pct) {
    if (sample.empty()) throw std::invalid_argument("percentile of empty sample");
    if (pct < 0.0 || pct > 100.0) throw std::invalid_argument("percentile out of [0, 100]");
    std::sort(sample.begin(), sample.end());
    const double rank = pct / 100.0 * static_cast<double>(sample.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sample[lo] + frac * (sample[hi] - sample[lo]);
}

TargetBounds winsorize_bounds(const Dataset& dataset, double lower_pct, double upper_pct) {
    if (dataset.records.empty()) throw std::invalid_argument("winsorize of empty dataset");
    if (!(lower_pct >= 0.0 && lower_pct < upper_pct && upper_pct <= 100.0))
        throw std::invalid_argument("winsorize percentiles must satisfy 0 <= lower < upper <= 100");

    const std::size_t d_count = dataset.schema.n_targets();
    TargetBounds bounds;
    bounds.lower.resize(d_count);
    bounds.upper.resize(d_count);
    std::vector<double> column(dataset.size());
    for (std::size_t d = 0; d < d_count; ++d) {
        for (std::size_t i = 0; i < dataset.size(); ++i) column[i] = dataset.records[i].targets[d];
        bounds.lower[d] = percentile(column, lower_pct);
        bounds.upper[d] = percentile(column, upper_pct);
    }
    return bounds;
}

Dataset clip_targets(const Dataset& dataset, const TargetBounds& bounds) {
    Dataset out = dataset;
    for (auto& rec : out.records) {
        for (std::size_t d = 0; d < rec.targets.size(); ++d)
            rec.targets[d] = std::clamp(rec.targets[d], bounds.lower[d], bounds.upper[d]);
        // keep the risk identity consistent with the clipped spread
        if (!rec.targets.empty()) rec.dxs = rec.duration * rec.targets[0];
    }
    return out;
}

Dataset winsorize_targets(const Dataset& dataset, double lower_pct, double upper_pct) {
    return clip_targets(dataset, winsorize_bounds(dataset, lower_pct, upper_pct));
}

std::vector<double> compute_sample_weights(const Dataset& dataset, int window_days, double floor) {
    if (window_days <= 0) throw std::invalid_argument("window_days must be positive");
    if (!(floor > 0.0 && floor <= 1.0)) throw std::invalid_argument("weight floor must be in (0, 1]");

    std::vector<double> weights(dataset.size(), floor);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& offset = dataset.records[i].last_trade_offset_days;
        if (!offset) continue;
        const double linear = 1.0 - static_cast<double>(*offset) / static_cast<double>(window_days);
        weights[i] = std::max(floor, linear);
    }
    return weights;
}

Dataset take(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.schema = dataset.schema;
    out.records.reserve(indices.size());
    for (std::size_t idx : indices) out.records.push_back(dataset.records.at(idx));
    if (dataset.has_weights()) {
        out.sample_weights.reserve(indices.size());
        for (std::size_t idx : indices) out.sample_weights.push_back(dataset.sample_weights.at(idx));
    }
    return out;
}

}  // namespace relval
