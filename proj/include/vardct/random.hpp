#pragma once

#include <cmath>
#include <cstdint>

#include "core.hpp"

namespace vardct {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

/**
 * Small counter-based generator. Streams are derived from (seed, stream id),
 * so per-ray sampling is reproducible regardless of thread scheduling.
 */
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t s = seed;
        const std::uint64_t a = detail::splitmix64(s);
        s = a ^ (stream * 0xD2B74407B1CE6E93ull + 0x9E3779B97F4A7C15ull);
        state = detail::splitmix64(s);
    }

    std::uint64_t next_u64() { return detail::splitmix64(state); }

    /// Uniform in (0, 1); never returns 0 so it is safe inside logs.
    double next_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }
};

namespace detail {

inline std::int64_t poisson_inversion(double rate, Rng& rng) {
    const double u = rng.next_double();
    double p = std::exp(-rate);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf && k < 1000000) {
        ++k;
        p *= rate / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

// Hormann's PTRS transformed-rejection sampler; exact for rate >= ~10.
inline std::int64_t poisson_ptrs(double rate, Rng& rng) {
    const double slam = std::sqrt(rate);
    const double llam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.next_double() - 0.5;
        const double v = rng.next_double();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        const double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * llam - rate - std::lgamma(k + 1.0))
            return static_cast<std::int64_t>(kf);
    }
}

}  // namespace detail

inline std::int64_t poisson_sample(double rate, Rng& rng) {
    require(rate >= 0.0 && std::isfinite(rate), "poisson_sample: invalid rate");
    if (rate == 0.0) return 0;
    if (rate < 30.0) return detail::poisson_inversion(rate, rng);
    return detail::poisson_ptrs(rate, rng);
}

}  // namespace vardct
