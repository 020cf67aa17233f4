#pragma once

#include <cstdint>
#include <random>

namespace lightning {

/// Seeded random stream. Distributions are derived from the raw 64-bit engine
/// output here rather than through <random>'s distribution classes, whose
/// algorithms are implementation-defined; trial records must be byte-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    /// Independent child stream; the parent is not advanced.
    Rng split(std::uint64_t stream) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1), 53 bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }
    double normal();

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// Poisson inverse CDF: smallest k with P(X <= k) > u. Used with a pre-drawn
/// uniform so that neighbouring parameter cells share random numbers.
std::uint64_t poisson_quantile(double mean, double u);

std::uint64_t splitmix64(std::uint64_t x);

} // namespace lightning
