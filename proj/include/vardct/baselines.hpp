#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "core.hpp"
#include "simulate.hpp"
#include "solvers1d.hpp"
#include "system_matrix.hpp"
#include "transforms.hpp"

namespace vardct {

// Smooth edge-preserving penalty, quadratic near zero and linear in the tail.
inline double huber_penalty(double x, double delta) {
    require(delta > 0.0, "huber_penalty: delta must be positive");
    const double a = std::abs(x) / delta;
    return delta * delta * (a - std::log1p(a));
}

inline double huber_grad(double x, double delta) {
    return x / (1.0 + std::abs(x) / delta);
}

inline double huber_hess(double x, double delta) {
    const double t = 1.0 + std::abs(x) / delta;
    return 1.0 / (t * t);
}

/// Poisson workspace with the posterior variances pinned to zero.
struct PlainWorkspace {
    Vec proj;       // (A x)_i
    Vec rate;       // eta_i exp(-(A x)_i)
    Vec back_rate;  // b_j
};

inline PlainWorkspace compute_plain_workspace(const SystemMatrix& A, const Vec& eta,
                                              const Vec& x) {
    require(static_cast<std::int64_t>(eta.size()) == A.n_rows,
            "plain workspace: eta size mismatch");
    PlainWorkspace ws;
    ws.proj = A.forward(x);
    ws.rate.resize(ws.proj.size());
    for (std::size_t i = 0; i < ws.proj.size(); ++i)
        ws.rate[i] = eta[i] * std::exp(-ws.proj[i]);
    ws.back_rate = A.back(ws.rate);
    return ws;
}

/// Negated Poisson log-likelihood with the count-only constants dropped.
inline double poisson_datafit(const Vec& y, const Vec& eta, const Vec& proj) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i)
        s += static_cast<long double>(y[i]) * proj[i] + eta[i] * std::exp(-proj[i]);
    return static_cast<double>(s);
}

inline constexpr double kMleImageCap = 20.0;

/**
 * Closed-form surrogate minimizer [x + log(b/b^y)/z_mle]_+. Pixels whose
 * every ray recorded zero counts have b^y = 0; the log argument is clamped
 * and the result capped so those pixels saturate instead of overflowing.
 */
inline double mle_update(double x_t, double by, double b, double z_mle) {
    const double by_safe = std::max(by, 1e-300);
    const double x = x_t + std::log(b / by_safe) / z_mle;
    return std::min(std::max(0.0, x), kMleImageCap);
}

struct BaselineResult {
    Vec x;
    std::vector<double> objective_trace;  // one value per iteration, index 0 = initial
};

inline BaselineResult run_mle(const SystemMatrix& A, const Vec& y, const Vec& eta,
                              int n_iters) {
    BaselineResult res;
    res.x.assign(static_cast<std::size_t>(A.n_cols), 0.0);
    for (int t = 0; t <= n_iters; ++t) {
        PlainWorkspace ws = compute_plain_workspace(A, eta, res.x);
        res.objective_trace.push_back(poisson_datafit(y, eta, ws.proj));
        if (t == n_iters) break;
        Vec by = A.back(y);
        parallel_for(A.n_cols, [&](std::int64_t j) {
            const std::size_t jj = static_cast<std::size_t>(j);
            if (!A.col_support[jj]) return;
            res.x[jj] = mle_update(res.x[jj], by[jj], ws.back_rate[jj], A.z_mle);
        });
    }
    return res;
}

inline BaselineResult run_mle(const SystemMatrix& A, const Sinogram& sino, int n_iters) {
    return run_mle(A, sino.counts_as_double(), sino.eta, n_iters);
}

// --- MAP with the smooth neighborhood penalty --------------------------------

struct MapPenaltyConfig {
    double beta = 1e6;
    double delta = 1e-4;
    BoundaryMode boundary = BoundaryMode::dirichlet;

    void validate() const {
        require(beta >= 0.0, "map: beta must be >= 0");
        require(delta > 0.0, "map: delta must be > 0");
    }
};

/**
 * Gibbs penalty beta * sum_k huber((D x)_k) over horizontal and vertical
 * pixel differences (Dirichlet boundary), realized on the stacked difference
 * transform. Keeps a per-pixel row adjacency for the separable surrogate.
 */
struct GibbsPenalty {
    SparsifyingTransform diff;
    double beta = 0.0;
    double delta = 1.0;
    // rows touching pixel j as (row index, psi_kj = +-1)
    std::vector<std::vector<std::pair<std::int64_t, double>>> rows_of;

    static GibbsPenalty build(const ImageGrid& grid, const MapPenaltyConfig& cfg) {
        cfg.validate();
        GibbsPenalty p;
        p.diff = build_overcomplete(grid, cfg.boundary);
        p.beta = cfg.beta;
        p.delta = cfg.delta;
        p.rows_of.resize(static_cast<std::size_t>(p.diff.n_cols));
        for (std::int64_t k = 0; k < p.diff.n_rows; ++k)
            for (std::int64_t e = p.diff.row_ptr[k]; e < p.diff.row_ptr[k + 1]; ++e)
                p.rows_of[static_cast<std::size_t>(p.diff.cols[e])].emplace_back(k,
                                                                                 p.diff.vals[e]);
        return p;
    }

    double value(const Vec& x) const {
        const Vec d = diff.apply(x);
        double s = 0.0;
        for (double dk : d) s += huber_penalty(dk, delta);
        return beta * s;
    }
};

inline double map_objective(const Vec& x, const SystemMatrix& A, const GibbsPenalty& pen,
                            const Vec& y, const Vec& eta) {
    return poisson_datafit(y, eta, A.forward(x)) + pen.value(x);
}

/**
 * Per-pixel surrogate minimization for MAP: the MLE exponential piece plus
 * the 1D split of the penalty, pi evaluated at d_k + 2 psi_kj (x - x_t) with
 * weight 1/2 per row. Solved by the 1D trust-region Newton method and
 * thresholded at zero.
 */
inline double map_update(std::int64_t j, double x_t, double by, double b, double z_mle,
                         const GibbsPenalty& pen, const Vec& d, double grad_tol_rel = 1e-10,
                         const TrustRegionParams& tr = {}) {
    const double by_safe = std::max(by, 1e-300);
    const auto& rows = pen.rows_of[static_cast<std::size_t>(j)];
    auto surr = [&](double x) {
        double s = by_safe * x + (b / z_mle) * std::exp(-z_mle * (x - x_t));
        for (const auto& [k, sgn] : rows)
            s += pen.beta * 0.5 *
                 huber_penalty(d[static_cast<std::size_t>(k)] + 2.0 * sgn * (x - x_t),
                               pen.delta);
        return s;
    };
    auto dsurr = [&](double x) {
        double s = by_safe - b * std::exp(-z_mle * (x - x_t));
        for (const auto& [k, sgn] : rows)
            s += pen.beta * sgn *
                 huber_grad(d[static_cast<std::size_t>(k)] + 2.0 * sgn * (x - x_t), pen.delta);
        return s;
    };
    auto d2surr = [&](double x) {
        double s = z_mle * b * std::exp(-z_mle * (x - x_t));
        for (const auto& [k, sgn] : rows)
            s += pen.beta * 2.0 *
                 huber_hess(d[static_cast<std::size_t>(k)] + 2.0 * sgn * (x - x_t), pen.delta);
        return s;
    };
    const double scale = std::max({by_safe, b, pen.beta * pen.delta, 1e-30});
    const double x = trust_region_newton_1d(surr, dsurr, d2surr, x_t,
                                            -std::numeric_limits<double>::infinity(),
                                            grad_tol_rel * scale, tr);
    return std::min(std::max(0.0, x), kMleImageCap);
}

inline BaselineResult run_map(const SystemMatrix& A, const GibbsPenalty& pen, const Vec& y,
                              const Vec& eta, int n_iters) {
    BaselineResult res;
    res.x.assign(static_cast<std::size_t>(A.n_cols), 0.0);
    const Vec by = A.back(y);
    for (int t = 0; t <= n_iters; ++t) {
        PlainWorkspace ws = compute_plain_workspace(A, eta, res.x);
        res.objective_trace.push_back(poisson_datafit(y, eta, ws.proj) + pen.value(res.x));
        if (t == n_iters) break;
        const Vec d = pen.diff.apply(res.x);
        Vec x_new = res.x;
        parallel_for(A.n_cols, [&](std::int64_t j) {
            const std::size_t jj = static_cast<std::size_t>(j);
            if (!A.col_support[jj]) return;
            x_new[jj] = map_update(j, res.x[jj], by[jj], ws.back_rate[jj], A.z_mle, pen, d);
        });
        res.x = std::move(x_new);
    }
    return res;
}

inline BaselineResult run_map(const SystemMatrix& A, const GibbsPenalty& pen,
                              const Sinogram& sino, int n_iters) {
    return run_map(A, pen, sino.counts_as_double(), sino.eta, n_iters);
}

// --- reweighted l2 ------------------------------------------------------------

struct Rewl2Config {
    double epsilon = 1e-6;
    int n_iters = 2000;

    void validate() const {
        require(epsilon > 0.0, "rewl2: epsilon must be positive");
        require(n_iters >= 0, "rewl2: n_iters must be >= 0");
    }
};

/// Q(x, gamma) = -log p(y|x) + (1/2) sum [(Psi x)^2 + eps]/gamma + (1/2) sum log gamma.
inline double rewl2_objective(const Vec& x, const Vec& gamma, const SystemMatrix& A,
                              const SparsifyingTransform& T, const Vec& y, const Vec& eta,
                              double epsilon) {
    const Vec d = T.apply(x);
    long double s = poisson_datafit(y, eta, A.forward(x));
    for (std::size_t k = 0; k < d.size(); ++k)
        s += 0.5L * (static_cast<long double>(d[k]) * d[k] + epsilon) / gamma[k] +
             0.5L * std::log(static_cast<long double>(gamma[k]));
    return static_cast<double>(s);
}

/**
 * One iteration: a single Newton step per pixel on the penalized surrogate,
 * thresholded at zero, followed by the closed-form weight refresh
 * gamma = (Psi x)^2 + eps.
 */
inline void rewl2_step(Vec& x, Vec& gamma, const SystemMatrix& A,
                       const SparsifyingTransform& T, const Vec& by, const Vec& eta,
                       const Rewl2Config& cfg) {
    PlainWorkspace ws = compute_plain_workspace(A, eta, x);
    const Vec d = T.apply(x);
    Vec wlin(static_cast<std::size_t>(T.n_rows)), winv(static_cast<std::size_t>(T.n_rows));
    for (std::size_t k = 0; k < wlin.size(); ++k) {
        wlin[k] = d[k] / gamma[k];
        winv[k] = 1.0 / gamma[k];
    }
    const Vec f = T.weighted_adjoint(wlin);
    Vec g = T.weighted_adjoint_abs(winv);
    for (double& gj : g) gj *= 0.5 * T.z2;

    Vec x_new = x;
    parallel_for(A.n_cols, [&](std::int64_t j) {
        const std::size_t jj = static_cast<std::size_t>(j);
        if (!A.col_support[jj]) return;
        const double denom = A.z_mle * ws.back_rate[jj] + 2.0 * g[jj];
        if (denom <= 0.0) return;
        const double step = (by[jj] - ws.back_rate[jj] + f[jj]) / denom;
        x_new[jj] = std::min(std::max(0.0, x[jj] - step), kMleImageCap);
    });
    x = std::move(x_new);

    const Vec d_new = T.apply(x);
    for (std::size_t k = 0; k < gamma.size(); ++k)
        gamma[k] = d_new[k] * d_new[k] + cfg.epsilon;
}

struct Rewl2Result {
    Vec x;
    Vec gamma;
    std::vector<double> objective_trace;
};

inline Rewl2Result run_rewl2(const SystemMatrix& A, const SparsifyingTransform& T,
                             const Sinogram& sino, const Rewl2Config& cfg) {
    cfg.validate();
    Rewl2Result res;
    res.x.assign(static_cast<std::size_t>(A.n_cols), 0.0);
    // weights start wide open, same initialization as the ARD runs
    res.gamma.assign(static_cast<std::size_t>(T.n_rows), 100.0);
    const Vec y = sino.counts_as_double();
    const Vec by = A.back(y);
    for (int t = 0; t <= cfg.n_iters; ++t) {
        res.objective_trace.push_back(
            rewl2_objective(res.x, res.gamma, A, T, y, sino.eta, cfg.epsilon));
        if (t == cfg.n_iters) break;
        rewl2_step(res.x, res.gamma, A, T, by, sino.eta, cfg);
    }
    return res;
}

}  // namespace vardct
