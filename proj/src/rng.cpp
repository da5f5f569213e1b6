#include "goldendie/rng.hpp"

#include <cmath>

namespace goldendie {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return lo + static_cast<std::int64_t>(next_u64()); // full 64-bit span
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % range);
}

double Rng::gaussian(double mean, double sigma) {
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
}

std::int64_t Rng::poisson(double lambda) {
    std::int64_t count = 0;
    // Knuth's product method, applied in chunks so exp(-lambda) stays normal.
    while (lambda > 400.0) {
        count += poisson(400.0);
        lambda -= 400.0;
    }
    if (lambda <= 0.0) return count;
    const double threshold = std::exp(-lambda);
    double p = 1.0;
    std::int64_t k = 0;
    do {
        ++k;
        p *= uniform();
    } while (p > threshold);
    return count + k - 1;
}

Rng Rng::fork(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x6a09e667f3bcc909ULL)));
}

} // namespace goldendie
