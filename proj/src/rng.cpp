#include "lightning/rng.hpp"

#include <cmath>
#include <numbers>

namespace lightning {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::split(std::uint64_t stream) const
{
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x632BE59BD9B4E019ull)));
}

double Rng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n)
{
    // rejection keeps the result unbiased for any n
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return r % n;
}

double Rng::normal()
{
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) {
        u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t poisson_quantile(double mean, double u)
{
    if (!(mean > 0.0)) {
        return 0;
    }
    // sequential search from the mode's left tail; means here are small (< 100)
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    if (p == 0.0) {
        // exp(-mean) underflows: normal approximation, z from bisection on the CDF
        double lo = -40.0, hi = 40.0;
        for (int i = 0; i < 100; ++i) {
            const double mid = 0.5 * (lo + hi);
            (0.5 * std::erfc(-mid / std::numbers::sqrt2) <= u ? lo : hi) = mid;
        }
        const double approx = std::floor(mean + std::sqrt(mean) * lo + 0.5);
        return approx < 0.0 ? 0 : static_cast<std::uint64_t>(approx);
    }
    while (cdf <= u && k < 100000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

} // namespace lightning
