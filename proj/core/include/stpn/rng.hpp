#pragma once

#include <cstdint>

namespace stpn {

/// xoshiro256** seeded through splitmix64. State transitions are integer
/// only, so a seed produces the same stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53 random bits.
    double uniform();
    double uniform(double lo, double hi);

    /// Unbiased integer in [0, bound). bound must be nonzero.
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal via Box-Muller (pairs cached).
    double normal();

    /// Normal with the given sigma, redrawn until within 2 sigma.
    double trunc_normal(double sigma);

    /// Independent stream derived from this rng's seed and a stream tag.
    Rng fork(std::uint64_t tag) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t s_[4] = {};
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace stpn
