#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "core.hpp"
#include "vard.hpp"

namespace vardct {

/// I(p||q) = sum p log(p/q) - p + q, with log(0/0) = 0.
inline double i_divergence(const Vec& p, const Vec& q) {
    require(p.size() == q.size(), "i_divergence: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        require(p[i] >= 0.0 && q[i] >= 0.0, "i_divergence: negative input");
        if (p[i] == 0.0) {
            s += q[i];
        } else if (q[i] == 0.0) {
            return std::numeric_limits<double>::infinity();
        } else {
            s += p[i] * std::log(p[i] / q[i]) - p[i] + q[i];
        }
    }
    return s;
}

/// Itakura-Saito divergence, sum log(p/q) + q/p - 1, with 0/0 = 1.
inline double is_divergence(const Vec& p, const Vec& q) {
    require(p.size() == q.size(), "is_divergence: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0 && q[i] == 0.0) continue;
        require(p[i] > 0.0 && q[i] > 0.0, "is_divergence: inputs must be positive");
        s += std::log(p[i] / q[i]) + q[i] / p[i] - 1.0;
    }
    return s;
}

inline double nrmse(const Vec& estimate, const Vec& truth) {
    require(estimate.size() == truth.size(), "nrmse: dimension mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = estimate[i] - truth[i];
        num += d * d;
        den += truth[i] * truth[i];
    }
    require(den > 0.0, "nrmse: ground truth has zero norm");
    return std::sqrt(num / den);
}

// --- objective gradients -------------------------------------------------

struct ObjectiveGradient {
    Vec wrt_m;      // b^y - b + f
    Vec wrt_v;      // b~ + xi/2 - 1/(2v)
    Vec wrt_gamma;  // (gamma - d^2 - sigma^2) / (2 gamma^2)
};

inline ObjectiveGradient objective_gradient(const PosteriorState& state, const SystemMatrix& A,
                                            const SparsifyingTransform& T,
                                            const Sinogram& sino) {
    const VardWorkspace ws = compute_workspace(state, A, T, sino);
    const Vec b_data = data_backprojection(A, sino);
    const Vec sig2 = T.apply_sq(state.v);
    ObjectiveGradient g;
    g.wrt_m.resize(state.m.size());
    g.wrt_v.resize(state.v.size());
    g.wrt_gamma.resize(state.gamma.size());
    for (std::size_t j = 0; j < state.m.size(); ++j) {
        g.wrt_m[j] = b_data[j] - ws.back_rate[j] + ws.prior_lin[j];
        g.wrt_v[j] = ws.back_rate_sq[j] + 0.5 * ws.prior_curv[j] - 0.5 / state.v[j];
    }
    for (std::size_t k = 0; k < state.gamma.size(); ++k) {
        const double gk = state.gamma[k];
        g.wrt_gamma[k] = (gk - ws.coeff[k] * ws.coeff[k] - sig2[k]) / (2.0 * gk * gk);
    }
    return g;
}

// --- KKT residuals --------------------------------------------------------

/**
 * First-order stationarity report for the full objective at (m, v, gamma).
 * mean_residual is normalized by max(b^y), variance_residual by median(1/v),
 * gamma_residual is relative. Pixels with empty system-matrix columns are
 * excluded from the mean residual (they are pinned at zero by construction).
 */
struct KktReport {
    double mean_residual = 0.0;
    double variance_residual = 0.0;
    double gamma_residual = 0.0;
    std::vector<std::int64_t> active_set;  // indices with m_j = 0
};

inline KktReport kkt_residuals(const PosteriorState& state, const SystemMatrix& A,
                               const SparsifyingTransform& T, const Sinogram& sino) {
    const VardWorkspace ws = compute_workspace(state, A, T, sino);
    const Vec b_data = data_backprojection(A, sino);
    KktReport rep;

    double by_scale = 0.0;
    for (double b : b_data) by_scale = std::max(by_scale, b);
    if (by_scale <= 0.0) by_scale = 1.0;

    Vec inv_v(state.v.size());
    for (std::size_t j = 0; j < state.v.size(); ++j) inv_v[j] = 1.0 / state.v[j];
    Vec tmp = inv_v;
    std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
    double v_scale = tmp[tmp.size() / 2];
    if (!(v_scale > 0.0)) v_scale = 1.0;

    for (std::size_t j = 0; j < state.m.size(); ++j) {
        if (state.m[j] == 0.0) rep.active_set.push_back(static_cast<std::int64_t>(j));
        const double gv = ws.back_rate_sq[j] + 0.5 * ws.prior_curv[j] - 0.5 * inv_v[j];
        rep.variance_residual = std::max(rep.variance_residual, std::abs(gv) / v_scale);
        if (!A.col_support[j]) continue;
        const double gm = b_data[j] - ws.back_rate[j] + ws.prior_lin[j];
        const double viol = state.m[j] > 0.0 ? std::abs(gm) : std::max(0.0, -gm);
        rep.mean_residual = std::max(rep.mean_residual, viol / by_scale);
    }

    const Vec gstar = gamma_update(state, T);
    for (std::size_t k = 0; k < state.gamma.size(); ++k) {
        const double rel = std::abs(state.gamma[k] - gstar[k]) / gstar[k];
        rep.gamma_residual = std::max(rep.gamma_residual, rel);
    }
    return rep;
}

// --- per-iteration decrease lower bound ------------------------------------

/**
 * Certified decrease for one exact-mode iteration: the objective drop is
 * bounded below by two I-divergences, a weighted squared log term and half
 * an Itakura-Saito divergence between consecutive hyperparameters. All four
 * terms are nonnegative. z_t stores +inf for pixels whose unconstrained mean
 * minimizer is negative while the iterate sits at zero; those positions
 * contribute the limit value 0.
 */
struct BoundReport {
    double f_decrease = 0.0;
    double bound_rhs = 0.0;
    Vec beta;
    Vec beta_tilde;
    Vec z_t;
    double i_div_mean = 0.0;
    double i_div_var = 0.0;
    double quad_term = 0.0;
    double is_div_gamma = 0.0;
    bool exact_minimizers = true;  // false when the step came from the fast solver
};

inline BoundReport decrease_bound(const SystemMatrix& A, const Sinogram& sino,
                                  const PosteriorState& state_t,
                                  const PosteriorState& state_t1, const VardWorkspace& ws_t,
                                  bool exact_minimizers, double f_t, double f_t1,
                                  double mean_tol = 1e-12) {
    const std::size_t p = state_t.m.size();
    const Vec b_data = data_backprojection(A, sino);
    const double inf = std::numeric_limits<double>::infinity();

    BoundReport rep;
    rep.exact_minimizers = exact_minimizers;
    rep.f_decrease = f_t - f_t1;
    rep.beta.assign(p, 0.0);
    rep.beta_tilde.assign(p, 0.0);
    rep.z_t.assign(p, ws_t.z1);

    Vec pm(p, 0.0), qm(p, 0.0);  // beta/Z and b/Z for the mean I-divergence
    Vec pv(p, 0.0), qv(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        if (!A.col_support[j]) continue;
        const double b = ws_t.back_rate[j];
        const double g = ws_t.prior_quad[j];
        const MeanSolve ms = mean_update_exact(state_t.m[j], b_data[j], b, ws_t.prior_lin[j], g,
                                               ws_t.z1, mean_tol);
        double beta = b_data[j] + ws_t.prior_lin[j] +
                      2.0 * g * (ms.unconstrained - state_t.m[j]);
        // At the exact root beta equals b exp(-z1 (mbar - m_t)) > 0; fall back to
        // that form if the affine expression rounds to a nonpositive value.
        if (!(beta > 0.0)) beta = b * std::exp(-ws_t.z1 * (ms.unconstrained - state_t.m[j]));
        rep.beta[j] = beta;
        // log(beta/b) = z1 (m_t - mbar) exactly at the root; the direct log of
        // the ratio loses all precision when m_t is tiny
        const double log_ratio = ws_t.z1 * (state_t.m[j] - ms.unconstrained);
        double z = ws_t.z1;
        if (ms.unconstrained < 0.0) {
            if (state_t.m[j] > 0.0) {
                z = log_ratio / state_t.m[j];
            } else {
                z = inf;
            }
        }
        rep.z_t[j] = z;
        if (std::isfinite(z)) {
            pm[j] = beta / z;
            qm[j] = b / z;
            rep.quad_term += g * (log_ratio / z) * (log_ratio / z);
        }
        const double beta_t =
            std::max(0.0, 0.5 / state_t1.v[j] - 0.5 * ws_t.prior_curv[j]);
        rep.beta_tilde[j] = beta_t;
        pv[j] = beta_t / ws_t.z1;
        qv[j] = ws_t.back_rate_sq[j] / ws_t.z1;
    }
    // each term is nonnegative in exact arithmetic; strip accumulation noise
    rep.i_div_mean = std::max(0.0, i_divergence(pm, qm));
    rep.i_div_var = std::max(0.0, i_divergence(pv, qv));
    rep.is_div_gamma = std::max(0.0, 0.5 * is_divergence(state_t.gamma, state_t1.gamma));
    rep.bound_rhs = rep.i_div_mean + rep.i_div_var + rep.quad_term + rep.is_div_gamma;
    return rep;
}

// --- alternative objective (hyperparameters eliminated) --------------------

/**
 * E_q[-log p(y|x)] + (1/2) sum_k log(mu_k^2 + sigma_k^2) - h[q], where mu
 * and sigma^2 are the transform-domain posterior mean and variance. Equals
 * min over gamma of the full objective plus the constant K/2.
 */
inline double alt_objective(const PosteriorState& state, const SystemMatrix& A,
                            const SparsifyingTransform& T, const Sinogram& sino) {
    const Vec proj = A.forward(state.m);
    const Vec proj_sq = A.forward_sq(state.v);
    double f1 = 0.0;
    for (std::int64_t i = 0; i < sino.size(); ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        f1 += static_cast<double>(sino.y[ii]) * proj[ii] +
              sino.eta[ii] * std::exp(0.5 * proj_sq[ii] - proj[ii]);
    }
    const Vec mu = T.apply(state.m);
    const Vec sig2 = T.apply_sq(state.v);
    double pen = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) pen += 0.5 * std::log(mu[k] * mu[k] + sig2[k]);
    double ent = 0.0;
    for (double vj : state.v) ent += 0.5 * std::log(vj);
    return f1 + pen - ent;
}

// --- checked driver ---------------------------------------------------------

struct CheckedVardResult {
    VardResult run;
    std::vector<BoundReport> bounds;  // one per iteration when requested
};

/**
 * run_vard plus the runtime theory checks selected by cfg.check_level.
 * full_bound asserts the per-iteration decrease bound (exact solver, one
 * B sub-iteration) and keeps the reports.
 */
inline CheckedVardResult run_vard_checked(const SystemMatrix& A, const SparsifyingTransform& T,
                                          const Sinogram& sino, const VardConfig& cfg,
                                          const IterCallback& extra = {}) {
    CheckedVardResult out;
    const bool want_bound = cfg.check_level == VardConfig::CheckLevel::full_bound;
    require(!want_bound || cfg.b_subiters == 1,
            "full_bound check requires a single B sub-iteration");
    IterCallback cb = [&](const IterationRecord& rec) {
        if (want_bound) {
            BoundReport rep =
                decrease_bound(A, sino, *rec.before, *rec.after, *rec.ws_before, rec.exact,
                               rec.f_before, rec.f_after, cfg.mean_tol);
            if (rec.exact) {
                const double slack_tol = 1e-8 * std::abs(rec.f_before);
                if (rep.f_decrease < rep.bound_rhs - slack_tol) {
                    std::ostringstream msg;
                    msg << "decrease bound violated at iteration " << rec.iter
                        << ": decrease=" << rep.f_decrease << " rhs=" << rep.bound_rhs;
                    throw numeric_error(msg.str());
                }
            }
            out.bounds.push_back(std::move(rep));
        }
        if (extra) extra(rec);
    };
    out.run = run_vard(A, T, sino, cfg, cb);
    return out;
}

}  // namespace vardct
