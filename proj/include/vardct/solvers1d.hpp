#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "core.hpp"

namespace vardct {

struct TrustRegionParams {
    double initial_radius = 1.0;
    double shrink = 0.5;
    double expand = 2.0;
    double accept_low = 0.25;   // ratio below this shrinks the region
    double accept_high = 0.75;  // ratio above this (at the boundary) expands it
    int max_iters = 200;
};

/**
 * Root of a strictly increasing C^1 function on (lo_limit, +inf).
 * Brackets by geometric expansion from x0, then Newton with bisection
 * fallback. Stops when |g(x)| <= tol.
 */
template <typename G, typename DG>
double solve_increasing_root(G&& g, DG&& dg, double x0, double lo_limit, double tol) {
    double lo = x0, hi = x0;
    double glo = g(lo), ghi = glo;
    double step = std::max(1e-3, std::abs(x0) * 0.5);
    // expand downward until g(lo) <= 0
    for (int it = 0; glo > 0.0 && it < 200; ++it) {
        double cand = lo - step;
        if (std::isfinite(lo_limit) && cand <= lo_limit)
            cand = 0.5 * (lo + lo_limit);
        hi = lo;
        ghi = glo;
        lo = cand;
        glo = g(lo);
        step *= 2.0;
    }
    // expand upward until g(hi) >= 0
    step = std::max(1e-3, std::abs(x0) * 0.5);
    for (int it = 0; ghi < 0.0 && it < 400; ++it) {
        lo = hi;
        glo = ghi;
        hi += step;
        ghi = g(hi);
        step *= 2.0;
    }
    if (glo > 0.0) return lo;  // pinned at the domain edge
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double gx = g(x);
        if (std::abs(gx) <= tol) return x;
        if (gx > 0.0)
            hi = x;
        else
            lo = x;
        const double d = dg(x);
        double next = d > 0.0 ? x - gx / d : std::numeric_limits<double>::quiet_NaN();
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x) break;
        x = next;
    }
    return x;
}

/**
 * One-dimensional Newton trust-region minimizer for a strictly convex smooth
 * function on (lo_limit, +inf). Step sizes come from the local quadratic
 * model, clamped to the trusted radius; the radius shrinks when the model's
 * predicted reduction is poor and grows when it is reliable. Terminates when
 * |f'(x)| <= grad_tol.
 */
template <typename F, typename DF, typename D2F>
double trust_region_newton_1d(F&& f, DF&& df, D2F&& d2f, double x0, double lo_limit,
                              double grad_tol, const TrustRegionParams& tr = {}) {
    double x = x0;
    double radius = tr.initial_radius;
    double fx = f(x);
    for (int it = 0; it < tr.max_iters; ++it) {
        const double g = df(x);
        if (std::abs(g) <= grad_tol) return x;
        const double h = std::max(d2f(x), 1e-300);
        double step = -g / h;
        if (std::abs(step) > radius) step = step > 0.0 ? radius : -radius;
        double cand = x + step;
        if (std::isfinite(lo_limit) && cand <= lo_limit) {
            cand = 0.5 * (x + lo_limit);
            step = cand - x;
        }
        const double predicted = -(g * step + 0.5 * h * step * step);
        const double fc = f(cand);
        const double actual = fx - fc;
        const double ratio = predicted > 0.0 ? actual / predicted : -1.0;
        if (ratio < tr.accept_low) {
            radius *= tr.shrink;
        } else if (ratio > tr.accept_high && std::abs(step) >= radius * (1.0 - 1e-12)) {
            radius *= tr.expand;
        }
        if (actual > 0.0) {
            x = cand;
            fx = fc;
        }
        if (radius < 1e-18 * std::max(1.0, std::abs(x))) break;
    }
    // Convexity makes the derivative increasing; fall back to bracketing if
    // the trust-region loop ran out of iterations before hitting grad_tol.
    if (std::abs(df(x)) > grad_tol)
        return solve_increasing_root(df, d2f, x, lo_limit, grad_tol);
    return x;
}

}  // namespace vardct
