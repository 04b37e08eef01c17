#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "core.hpp"
#include "simulate.hpp"
#include "solvers1d.hpp"
#include "system_matrix.hpp"
#include "transforms.hpp"

namespace vardct {

inline constexpr double kGammaFloor = 1e-30;

/// Factorized Gaussian posterior (means, variances) plus hyperparameters.
struct PosteriorState {
    Vec m;      // length p, >= 0
    Vec v;      // length p, > 0
    Vec gamma;  // length K, > 0
};

/**
 * Per-iteration quantities shared by all pixel updates. back_rate_sq carries
 * the 1/2 factor, i.e. b~_j = sum_i phi_ij^2 mu_i / 2. `slack` is the
 * constant dummy-variable term of the separable bound; including it makes
 * the majorizer tight at the expansion point.
 */
struct VardWorkspace {
    Vec mean_proj;     // (A m)_i
    Vec var_proj;      // (A.A v)_i
    Vec rate;          // mu_i = eta_i exp(var_proj/2 - mean_proj)
    Vec back_rate;     // b_j
    Vec back_rate_sq;  // b~_j (with the 1/2)
    Vec coeff;         // d_k = (Psi m)_k
    Vec prior_lin;     // f_j = sum_k psi_kj d_k / gamma_k
    Vec prior_quad;    // g_j = z2 sum_k |psi_kj| / (2 gamma_k)
    Vec prior_curv;    // xi_j = sum_k psi_kj^2 / gamma_k
    double prior_const = 0.0;  // h = sum_k d_k^2 / (2 gamma_k)
    double slack = 0.0;        // sum_i mu_i - sum_j (b_j + b~_j)/z1
    double z1 = 0.0, z2 = 0.0;
};

struct VardConfig {
    enum class Solver { fast_newton, exact_1d };
    enum class CheckLevel { none, monotone, full_bound };

    int n_iters = 2000;
    Solver solver = Solver::fast_newton;
    CheckLevel check_level = CheckLevel::none;
    int b_subiters = 1;  // inner (m, v) passes per outer iteration
    double m_init = 0.0;
    double v_init = 1.0;
    double gamma_init = 100.0;
    double mean_tol = 1e-12;  // relative gradient tolerance, exact mean solve
    double var_tol = 1e-10;   // relative gradient tolerance, variance solve
    double monotone_tol = 1e-9;
    TrustRegionParams trust_region;

    void validate() const { require(n_iters >= 0, "vard: n_iters must be >= 0"); }
};

struct ObjectiveParts {
    double f = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
};

inline Vec data_backprojection(const SystemMatrix& A, const Sinogram& sino) {
    require(sino.size() == A.n_rows, "data_backprojection: size mismatch");
    return A.back(sino.counts_as_double());
}

inline PosteriorState make_initial_state(const SystemMatrix& A, const SparsifyingTransform& T,
                                         const VardConfig& cfg) {
    PosteriorState s;
    s.m.assign(static_cast<std::size_t>(A.n_cols), cfg.m_init);
    s.v.assign(static_cast<std::size_t>(A.n_cols), cfg.v_init);
    s.gamma.assign(static_cast<std::size_t>(T.n_rows), cfg.gamma_init);
    for (std::int64_t j = 0; j < A.n_cols; ++j)
        if (!A.col_support[static_cast<std::size_t>(j)]) s.m[static_cast<std::size_t>(j)] = 0.0;
    return s;
}

inline VardWorkspace compute_workspace(const PosteriorState& state, const SystemMatrix& A,
                                       const SparsifyingTransform& T, const Sinogram& sino) {
    require(static_cast<std::int64_t>(state.m.size()) == A.n_cols &&
                static_cast<std::int64_t>(state.v.size()) == A.n_cols,
            "workspace: state/pixel size mismatch");
    require(static_cast<std::int64_t>(state.gamma.size()) == T.n_rows,
            "workspace: gamma/transform size mismatch");
    require(sino.size() == A.n_rows, "workspace: sinogram size mismatch");

    VardWorkspace ws;
    ws.z1 = A.z1;
    ws.z2 = T.z2;
    ws.mean_proj = A.forward(state.m);
    ws.var_proj = A.forward_sq(state.v);
    ws.rate.resize(static_cast<std::size_t>(A.n_rows));
    parallel_for(A.n_rows, [&](std::int64_t i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        ws.rate[ii] = sino.eta[ii] * std::exp(0.5 * ws.var_proj[ii] - ws.mean_proj[ii]);
    });
    ws.back_rate = A.back(ws.rate);
    ws.back_rate_sq = A.back_sq(ws.rate);
    for (double& b : ws.back_rate_sq) b *= 0.5;

    ws.coeff = T.apply(state.m);
    Vec wlin(static_cast<std::size_t>(T.n_rows)), winv(static_cast<std::size_t>(T.n_rows));
    long double h = 0.0L;
    for (std::int64_t k = 0; k < T.n_rows; ++k) {
        const std::size_t kk = static_cast<std::size_t>(k);
        const double inv_g = 1.0 / state.gamma[kk];
        wlin[kk] = ws.coeff[kk] * inv_g;
        winv[kk] = inv_g;
        h += 0.5L * static_cast<long double>(ws.coeff[kk]) * ws.coeff[kk] * inv_g;
    }
    ws.prior_const = static_cast<double>(h);
    ws.prior_lin = T.weighted_adjoint(wlin);
    ws.prior_quad = T.weighted_adjoint_abs(winv);
    for (double& g : ws.prior_quad) g *= 0.5 * ws.z2;
    ws.prior_curv = T.weighted_adjoint_sq(winv);

    long double s_rate = 0.0L, s_back = 0.0L;
    for (double r : ws.rate) s_rate += r;
    for (std::size_t j = 0; j < ws.back_rate.size(); ++j)
        s_back += static_cast<long double>(ws.back_rate[j]) + ws.back_rate_sq[j];
    ws.slack = static_cast<double>(s_rate - s_back / ws.z1);
    return ws;
}

/// F = F1 + F2 + F3 evaluated from a workspace already built at `state`.
/// Reductions run in extended precision: per-iteration decreases late in a
/// run sit far below |F| and must not drown in accumulation noise.
inline ObjectiveParts objective_from_workspace(const VardWorkspace& ws,
                                               const PosteriorState& state,
                                               const Sinogram& sino) {
    ObjectiveParts o;
    long double f1 = 0.0L;
    for (std::int64_t i = 0; i < sino.size(); ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        f1 += static_cast<long double>(sino.y[ii]) * ws.mean_proj[ii] + ws.rate[ii];
    }
    o.f1 = static_cast<double>(f1);
    o.f2 = ws.prior_const;
    long double quad = 0.0L, ent = 0.0L, lg = 0.0L;
    for (std::size_t j = 0; j < state.v.size(); ++j) {
        quad += static_cast<long double>(ws.prior_curv[j]) * state.v[j];
        ent += std::log(state.v[j]);
    }
    for (double g : state.gamma) lg += std::log(g);
    o.f3 = static_cast<double>(0.5L * quad - 0.5L * ent + 0.5L * lg);
    o.f = static_cast<double>(f1 + ws.prior_const + 0.5L * quad - 0.5L * ent + 0.5L * lg);
    return o;
}

inline ObjectiveParts objective(const PosteriorState& state, const SystemMatrix& A,
                                const SparsifyingTransform& T, const Sinogram& sino) {
    return objective_from_workspace(compute_workspace(state, A, T, sino), state, sino);
}

// --- 1D surrogate pieces -----------------------------------------------------

inline double mean_surrogate_value(double m, double m_t, double by, double b, double f,
                                   double g, double z1) {
    return by * m + (b / z1) * std::exp(-z1 * (m - m_t)) + f * (m - m_t) +
           g * (m - m_t) * (m - m_t);
}

inline double var_surrogate_value(double v, double v_t, double bt, double xi, double z1) {
    return (bt / z1) * std::exp(z1 * (v - v_t)) + 0.5 * xi * v - 0.5 * std::log(v);
}

/// Single Newton step on the mean surrogate, thresholded at zero.
inline double mean_update_fast(double m_t, double by, double b, double f, double g, double z1) {
    const double denom = z1 * b + 2.0 * g;
    if (denom <= 0.0) return m_t;
    return std::max(0.0, m_t - (by - b + f) / denom);
}

struct MeanSolve {
    double value;          // constrained minimizer
    double unconstrained;  // root of the surrogate derivative
};

/// Global minimizer of the 1D mean surrogate on [0, inf).
inline MeanSolve mean_update_exact(double m_t, double by, double b, double f, double g,
                                   double z1, double rel_tol = 1e-12) {
    const double scale = std::max({by + std::abs(f), b, 2.0 * g, 1e-30});
    auto grad = [&](double u) { return by + f + 2.0 * g * u - b * std::exp(-z1 * u); };
    auto hess = [&](double u) { return 2.0 * g + z1 * b * std::exp(-z1 * u); };
    double u;
    if (b <= 0.0) {
        u = g > 0.0 ? -(by + f) / (2.0 * g) : 0.0;
    } else {
        u = solve_increasing_root(grad, hess, 0.0,
                                  -std::numeric_limits<double>::infinity(), rel_tol * scale);
    }
    const double m_bar = m_t + u;
    return {std::max(0.0, m_bar), m_bar};
}

/// Minimizer of the 1D variance surrogate on (0, inf), trust-region Newton.
inline double variance_update(double v_t, double bt, double xi, double z1,
                              double rel_tol = 1e-10, const TrustRegionParams& tr = {}) {
    require(bt >= 0.0 && xi > 0.0 && v_t > 0.0, "variance_update: invalid inputs");
    const double scale = std::max({bt, 0.5 * xi, 0.5 / v_t, 1e-30});
    auto f = [&](double v) { return var_surrogate_value(v, v_t, bt, xi, z1); };
    auto df = [&](double v) { return bt * std::exp(z1 * (v - v_t)) + 0.5 * xi - 0.5 / v; };
    auto d2f = [&](double v) { return z1 * bt * std::exp(z1 * (v - v_t)) + 0.5 / (v * v); };
    if (bt == 0.0) return 1.0 / xi;
    TrustRegionParams params = tr;
    params.initial_radius = std::max(tr.initial_radius * v_t, 1e-6);
    return trust_region_newton_1d(f, df, d2f, v_t, 0.0, rel_tol * scale, params);
}

/// Closed-form hyperparameter update gamma = (Psi m).(Psi m) + (Psi.Psi) v.
inline Vec gamma_update(const PosteriorState& state, const SparsifyingTransform& T) {
    const Vec d = T.apply(state.m);
    const Vec s2 = T.apply_sq(state.v);
    Vec g(static_cast<std::size_t>(T.n_rows));
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = std::max(d[k] * d[k] + s2[k], kGammaFloor);
    return g;
}

/**
 * Separable surrogate value at (m, v) expanded at the workspace state.
 * F(m, v, gamma_t) <= surrogate + h_t + (1/2) sum log gamma_t, with equality
 * at the expansion point (the dummy-variable slack is part of the sum).
 */
inline double surrogate_value(const Vec& m, const Vec& v, const PosteriorState& state_t,
                              const VardWorkspace& ws, const Vec& b_data) {
    require(m.size() == state_t.m.size() && v.size() == state_t.v.size(),
            "surrogate_value: dimension mismatch");
    long double s = ws.slack;
    for (std::size_t j = 0; j < m.size(); ++j) {
        s += mean_surrogate_value(m[j], state_t.m[j], b_data[j], ws.back_rate[j],
                                  ws.prior_lin[j], ws.prior_quad[j], ws.z1);
        s += var_surrogate_value(v[j], state_t.v[j], ws.back_rate_sq[j], ws.prior_curv[j],
                                 ws.z1);
    }
    return static_cast<double>(s);
}

// --- driver ------------------------------------------------------------------

struct TraceRow {
    int iter = 0;
    double f = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
    double wall_ms = 0.0;
};

struct IterationRecord {
    int iter = 0;
    const PosteriorState* before = nullptr;
    const VardWorkspace* ws_before = nullptr;
    const PosteriorState* after = nullptr;
    double f_before = 0.0, f_after = 0.0;
    bool exact = false;  // whether the (m, v) updates were exact 1D solves
};

using IterCallback = std::function<void(const IterationRecord&)>;

struct VardResult {
    PosteriorState state;
    std::vector<TraceRow> trace;
    int exact_retries = 0;
    std::vector<std::int64_t> frozen;  // pixels with empty system-matrix columns
};

namespace detail {

inline void vard_b_step(const VardWorkspace& ws, const Vec& b_data, const SystemMatrix& A,
                        const VardConfig& cfg, bool exact, PosteriorState& state,
                        Vec* m_unconstrained) {
    const std::int64_t p = A.n_cols;
    Vec m_new(static_cast<std::size_t>(p)), v_new(static_cast<std::size_t>(p));
    parallel_for(p, [&](std::int64_t j) {
        const std::size_t jj = static_cast<std::size_t>(j);
        if (!A.col_support[jj]) {
            // no data: mean pinned at zero, variance solves the b~=0 case
            m_new[jj] = 0.0;
            v_new[jj] = ws.prior_curv[jj] > 0.0 ? 1.0 / ws.prior_curv[jj] : state.v[jj];
            if (m_unconstrained) (*m_unconstrained)[jj] = 0.0;
            return;
        }
        if (exact) {
            const MeanSolve ms =
                mean_update_exact(state.m[jj], b_data[jj], ws.back_rate[jj], ws.prior_lin[jj],
                                  ws.prior_quad[jj], ws.z1, cfg.mean_tol);
            m_new[jj] = ms.value;
            if (m_unconstrained) (*m_unconstrained)[jj] = ms.unconstrained;
        } else {
            m_new[jj] = mean_update_fast(state.m[jj], b_data[jj], ws.back_rate[jj],
                                         ws.prior_lin[jj], ws.prior_quad[jj], ws.z1);
        }
        v_new[jj] = variance_update(state.v[jj], ws.back_rate_sq[jj], ws.prior_curv[jj], ws.z1,
                                    cfg.var_tol, cfg.trust_region);
    });
    state.m = std::move(m_new);
    state.v = std::move(v_new);
}

}  // namespace detail

/**
 * Runs the alternating-minimization loop: workspace, parallel 1D mean and
 * variance solves, closed-form gamma update. With the fast solver a retry in
 * exact mode is triggered whenever the objective fails to decrease, so the
 * descent guarantee of the exact solver carries over in practice.
 */
inline VardResult run_vard(const SystemMatrix& A, const SparsifyingTransform& T,
                           const Sinogram& sino, const VardConfig& cfg,
                           const IterCallback& callback = {}) {
    cfg.validate();
    require(A.z1 > 0.0, "run_vard: system matrix has no nonzero row");
    sino.validate();

    VardResult res;
    res.state = make_initial_state(A, T, cfg);
    for (std::int64_t j = 0; j < A.n_cols; ++j)
        if (!A.col_support[static_cast<std::size_t>(j)]) res.frozen.push_back(j);

    const Vec b_data = data_backprojection(A, sino);
    const auto t_start = std::chrono::steady_clock::now();
    auto wall_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         t_start)
            .count();
    };

    VardWorkspace ws = compute_workspace(res.state, A, T, sino);
    ObjectiveParts obj = objective_from_workspace(ws, res.state, sino);
    require(std::isfinite(obj.f), "run_vard: initial objective is not finite");
    res.trace.push_back({0, obj.f, obj.f1, obj.f2, obj.f3, wall_ms()});

    const bool want_exact = cfg.solver == VardConfig::Solver::exact_1d;
    PosteriorState saved;
    VardWorkspace saved_ws;

    for (int t = 1; t <= cfg.n_iters; ++t) {
        const double f_prev = obj.f;
        const double tol = cfg.monotone_tol * std::abs(f_prev);
        saved = res.state;
        saved_ws = ws;

        auto one_pass = [&](bool exact) {
            for (int s = 0; s < cfg.b_subiters; ++s) {
                if (s > 0) ws = compute_workspace(res.state, A, T, sino);
                detail::vard_b_step(ws, b_data, A, cfg, exact, res.state, nullptr);
            }
            res.state.gamma = gamma_update(res.state, T);
            ws = compute_workspace(res.state, A, T, sino);
            obj = objective_from_workspace(ws, res.state, sino);
        };

        bool used_exact = want_exact;
        one_pass(want_exact);
        if (!want_exact && (!std::isfinite(obj.f) || obj.f > f_prev + tol)) {
            res.state = saved;
            ws = saved_ws;
            one_pass(true);
            used_exact = true;
            ++res.exact_retries;
        }

        if (cfg.check_level != VardConfig::CheckLevel::none && used_exact &&
            (!std::isfinite(obj.f) || obj.f > f_prev + tol)) {
            std::ostringstream msg;
            msg << "run_vard: objective increased at iteration " << t << ": F_prev=" << f_prev
                << " F_new=" << obj.f << " (tol " << tol << ")";
            throw numeric_error(msg.str());
        }

        if (callback) {
            IterationRecord rec;
            rec.iter = t;
            rec.before = &saved;
            rec.ws_before = &saved_ws;
            rec.after = &res.state;
            rec.f_before = f_prev;
            rec.f_after = obj.f;
            rec.exact = used_exact;
            callback(rec);
        }
        res.trace.push_back({t, obj.f, obj.f1, obj.f2, obj.f3, wall_ms()});
    }
    return res;
}

}  // namespace vardct
