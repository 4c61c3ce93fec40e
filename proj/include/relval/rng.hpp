#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace relval {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic RNG: raw mt19937_64 output is fully specified by the
// standard, so all derived draws below are bit-stable across platforms.
// std::*_distribution is implementation-defined and must not be used here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // in [0, 1)
    double uniform01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // unbiased draw in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t rem = (UINT64_MAX % n + 1) % n;  // 2^64 mod n
        std::uint64_t x = next();
        while (rem != 0 && x >= static_cast<std::uint64_t>(0) - rem) x = next();
        return x % n;
    }

    // Box-Muller, trig form; the second variate is discarded to keep the
    // generator stateless between calls.
    double normal() {
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Derives an independent stream seed; `tag` names the consumer so the same
// base seed never feeds two purposes the same sequence.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(seed ^ splitmix64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    return splitmix64(derive_seed(seed, tag) ^ splitmix64(index + 1));
}

// stream tags, one per seeded consumer
namespace rng_tag {
constexpr std::uint64_t kSplit = 0x01;
constexpr std::uint64_t kEncoding = 0x02;
constexpr std::uint64_t kTree = 0x03;
constexpr std::uint64_t kUniverse = 0x04;
constexpr std::uint64_t kTargets = 0x05;
constexpr std::uint64_t kPaths = 0x06;
constexpr std::uint64_t kOrders = 0x07;
constexpr std::uint64_t kForest = 0x08;
constexpr std::uint64_t kTune = 0x09;
constexpr std::uint64_t kBootstrap = 0x0A;
}  // namespace rng_tag

}  // namespace relval
