#pragma once

// Counter-based pseudo-random streams built on the splitmix64 generator
// (Steele/Lea/Flood; Vigna's public-domain reference constants). Every
// Monte Carlo consumer derives one stream per (seed, stream index), so shot
// results are reproducible under any parallel schedule.

#include <cmath>
#include <cstdint>

namespace crookslab {

inline constexpr const char* rng_algorithm_name = "splitmix64";

/// splitmix64 output/finalizer step.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t state) : state_(state) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Poisson draw by CDF inversion; intended for small means (lambda < ~30).
    int poisson(double lambda) {
        if (lambda <= 0.0) {
            return 0;
        }
        const double u = uniform();
        double pmf = std::exp(-lambda);
        double cdf = pmf;
        int k = 0;
        while (u > cdf && k < 1000000) {
            ++k;
            pmf *= lambda / static_cast<double>(k);
            cdf += pmf;
        }
        return k;
    }

private:
    std::uint64_t state_ = 0;
};

/// Decorrelated stream for (seed, index): both words pass through the
/// splitmix64 finalizer before mixing.
inline RngStream stream_for(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t a = seed;
    std::uint64_t b = index ^ 0xD1B54A32D192ED03ull;
    const std::uint64_t ha = splitmix64_next(a);
    const std::uint64_t hb = splitmix64_next(b);
    std::uint64_t s = ha ^ (hb + 0x9E3779B97F4A7C15ull + (ha << 6) + (ha >> 2));
    return RngStream(s);
}

/// Deterministic sub-seed derivation for named experiment cells
/// (e.g. per (tau index, beta index, direction)).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag0, std::uint64_t tag1 = 0,
                                 std::uint64_t tag2 = 0) {
    std::uint64_t s = master;
    (void)splitmix64_next(s);
    s ^= 0x2545F4914F6CDD1Dull * (tag0 + 1);
    (void)splitmix64_next(s);
    s ^= 0x9E3779B97F4A7C15ull * (tag1 + 1);
    (void)splitmix64_next(s);
    s ^= 0xBF58476D1CE4E5B9ull * (tag2 + 1);
    (void)splitmix64_next(s);
    return s;
}

}  // namespace crookslab
