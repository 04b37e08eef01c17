#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core.hpp"
#include "random.hpp"
#include "system_matrix.hpp"

namespace vardct {

/// Photon-count measurements plus the blank-scan means they were drawn with.
struct Sinogram {
    std::vector<std::int64_t> y;  // counts, >= 0
    Vec eta;                      // blank-scan means, > 0
    std::string geometry_id;      // provenance tag
    std::uint64_t seed = 0;

    std::int64_t size() const { return static_cast<std::int64_t>(y.size()); }

    Vec counts_as_double() const {
        Vec out(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) out[i] = static_cast<double>(y[i]);
        return out;
    }

    void validate() const {
        require(y.size() == eta.size(), "sinogram: y and eta sizes differ");
        for (std::size_t i = 0; i < y.size(); ++i) {
            require(y[i] >= 0, "sinogram: negative count");
            require(eta[i] > 0.0, "sinogram: eta must be positive");
        }
    }
};

/// Expected counts eta_i * exp(-(A x)_i).
inline Vec expected_rates(const SystemMatrix& A, const Vec& x, const Vec& eta) {
    require(static_cast<std::int64_t>(eta.size()) == A.n_rows, "expected_rates: eta size");
    Vec p = A.forward(x);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = eta[i] * std::exp(-p[i]);
    return p;
}

/**
 * Draws y_i ~ Poisson(eta_i exp(-(A x)_i)). Each ray gets its own counter
 * stream derived from (seed, i), so results do not depend on the thread
 * count and identical seeds give identical sinograms.
 */
inline Sinogram sample_sinogram(const SystemMatrix& A, const Vec& x, const Vec& eta,
                                std::uint64_t seed, std::string geometry_id = "") {
    require(static_cast<std::int64_t>(eta.size()) == A.n_rows,
            "sample_sinogram: eta size mismatch");
    for (double e : eta) require(e > 0.0, "sample_sinogram: eta must be positive");
    const Vec rate = expected_rates(A, x, eta);
    Sinogram s;
    s.y.resize(static_cast<std::size_t>(A.n_rows));
    s.eta = eta;
    s.seed = seed;
    s.geometry_id = std::move(geometry_id);
    parallel_for(A.n_rows, [&](std::int64_t i) {
        Rng rng(seed, static_cast<std::uint64_t>(i));
        s.y[static_cast<std::size_t>(i)] = poisson_sample(rate[static_cast<std::size_t>(i)], rng);
    });
    return s;
}

inline Sinogram sample_sinogram(const SystemMatrix& A, const Vec& x, double eta,
                                std::uint64_t seed, std::string geometry_id = "") {
    require(eta > 0.0, "sample_sinogram: eta must be positive");
    return sample_sinogram(A, x, Vec(static_cast<std::size_t>(A.n_rows), eta), seed,
                           std::move(geometry_id));
}

/**
 * Post-log data for the Gaussian-model baseline: yt_i = log(eta_i / y_i)
 * with weight y_i. Zero counts are clamped to 1 here only; the Poisson-model
 * algorithms consume the raw counts including zeros.
 */
struct PostLogData {
    Vec values;   // yt
    Vec weights;  // max(y, 1)
};

inline PostLogData post_log(const Sinogram& s) {
    s.validate();
    PostLogData out;
    out.values.resize(s.y.size());
    out.weights.resize(s.y.size());
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        const double yc = std::max<double>(static_cast<double>(s.y[i]), 1.0);
        out.values[i] = std::log(s.eta[i] / yc);
        out.weights[i] = yc;
    }
    return out;
}

}  // namespace vardct
