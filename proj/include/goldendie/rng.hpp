#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace goldendie {

/// Deterministic random source. All distribution transforms are implemented
/// here rather than through std:: distributions so that a given seed yields
/// the same stream on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive. Unbiased by rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller (two uniforms per draw, no caching).
    double gaussian(double mean = 0.0, double sigma = 1.0);

    /// Poisson-distributed count. Exact for any lambda >= 0; large rates are
    /// split into chunks so the product method never underflows.
    std::int64_t poisson(double lambda);

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Independent sub-stream derived from this generator's seed. Forking is
    /// a pure function of (seed, stream): it does not consume state.
    Rng fork(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

/// SplitMix64 step; used for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

} // namespace goldendie
