// Test-only reference implementations: dense linear algebra, brute-force
// objective evaluation and 1D grid search. Everything here is independent of
// the sparse code paths it is used to check.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "vardct/core.hpp"
#include "vardct/simulate.hpp"
#include "vardct/system_matrix.hpp"
#include "vardct/transforms.hpp"

namespace oracle {

using vardct::Vec;
using Dense = std::vector<Vec>;  // row-major dense matrix

inline Vec dense_matvec(const Dense& A, const Vec& x) {
    Vec out(A.size(), 0.0);
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) out[i] += A[i][j] * x[j];
    return out;
}

inline Vec dense_matvec_t(const Dense& A, const Vec& w) {
    const std::size_t p = A.empty() ? 0 : A[0].size();
    Vec out(p, 0.0);
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < p; ++j) out[j] += A[i][j] * w[i];
    return out;
}

inline Dense elementwise_square(const Dense& A) {
    Dense B = A;
    for (auto& row : B)
        for (double& v : row) v = v * v;
    return B;
}

inline vardct::SystemMatrix sparse_from_dense(const Dense& A) {
    std::vector<std::vector<std::pair<std::int32_t, double>>> rows(A.size());
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < A[i].size(); ++j)
            if (A[i][j] != 0.0) rows[i].emplace_back(static_cast<std::int32_t>(j), A[i][j]);
    return vardct::SystemMatrix::from_rows(static_cast<std::int64_t>(A[0].size()), rows);
}

inline vardct::SparsifyingTransform transform_from_dense(const Dense& Psi) {
    vardct::SparsifyingTransform t;
    t.kind = vardct::TransformKind::complete;
    t.n_rows = static_cast<std::int64_t>(Psi.size());
    t.n_cols = static_cast<std::int64_t>(Psi[0].size());
    t.row_ptr.assign(1, 0);
    for (const auto& row : Psi) {
        for (std::size_t j = 0; j < row.size(); ++j)
            if (row[j] != 0.0) {
                t.cols.push_back(static_cast<std::int32_t>(j));
                t.vals.push_back(row[j]);
            }
        t.row_ptr.push_back(static_cast<std::int64_t>(t.cols.size()));
    }
    t.finalize_z2();
    return t;
}

inline Dense densify(const vardct::SystemMatrix& A) {
    Dense out(static_cast<std::size_t>(A.n_rows), Vec(static_cast<std::size_t>(A.n_cols), 0.0));
    for (std::int64_t i = 0; i < A.n_rows; ++i)
        for (std::int64_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(A.cols[k])] += A.vals[k];
    return out;
}

inline Dense densify(const vardct::SparsifyingTransform& T) {
    Dense out(static_cast<std::size_t>(T.n_rows), Vec(static_cast<std::size_t>(T.n_cols), 0.0));
    for (std::int64_t k = 0; k < T.n_rows; ++k)
        for (std::int64_t e = T.row_ptr[k]; e < T.row_ptr[k + 1]; ++e)
            out[static_cast<std::size_t>(k)][static_cast<std::size_t>(T.cols[e])] += T.vals[e];
    return out;
}

// Brute-force objective straight from the defining formulas on dense
// matrices; no shared code with the production path.
inline double dense_objective(const Dense& Phi, const Dense& Psi, const Vec& y, const Vec& eta,
                              const Vec& m, const Vec& v, const Vec& gamma) {
    const std::size_t n = Phi.size();
    const std::size_t p = m.size();
    const std::size_t K = Psi.size();
    double f1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double lin = 0.0, quad = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            lin += Phi[i][j] * m[j];
            quad += Phi[i][j] * Phi[i][j] * v[j];
        }
        f1 += y[i] * lin + eta[i] * std::exp(-lin + 0.5 * quad);
    }
    double f2 = 0.0, f3 = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double d = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            d += Psi[k][j] * m[j];
            s2 += Psi[k][j] * Psi[k][j] * v[j];
        }
        f2 += 0.5 * d * d / gamma[k];
        f3 += 0.5 * s2 / gamma[k] + 0.5 * std::log(gamma[k]);
    }
    for (std::size_t j = 0; j < p; ++j) f3 -= 0.5 * std::log(v[j]);
    return f1 + f2 + f3;
}

// Extended-precision twin of dense_objective; the per-slot hyperparameter
// argmin comparison needs curvature resolved below double rounding of F.
inline long double dense_objective_ld(const Dense& Phi, const Dense& Psi, const Vec& y,
                                      const Vec& eta, const Vec& m, const Vec& v,
                                      const std::vector<long double>& gamma) {
    const std::size_t n = Phi.size();
    const std::size_t p = m.size();
    const std::size_t K = Psi.size();
    long double f = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        long double lin = 0.0L, quad = 0.0L;
        for (std::size_t j = 0; j < p; ++j) {
            lin += static_cast<long double>(Phi[i][j]) * m[j];
            quad += static_cast<long double>(Phi[i][j]) * Phi[i][j] * v[j];
        }
        f += y[i] * lin + eta[i] * std::exp(-lin + 0.5L * quad);
    }
    for (std::size_t k = 0; k < K; ++k) {
        long double d = 0.0L, s2 = 0.0L;
        for (std::size_t j = 0; j < p; ++j) {
            d += static_cast<long double>(Psi[k][j]) * m[j];
            s2 += static_cast<long double>(Psi[k][j]) * Psi[k][j] * v[j];
        }
        f += 0.5L * d * d / gamma[k] + 0.5L * s2 / gamma[k] + 0.5L * std::log(gamma[k]);
    }
    for (std::size_t j = 0; j < p; ++j) f -= 0.5L * std::log(static_cast<long double>(v[j]));
    return f;
}

inline long double golden_section_min_ld(const std::function<long double(long double)>& f,
                                         long double lo, long double hi, int iters = 200) {
    const long double r = 0.5L * (std::sqrt(5.0L) - 1.0L);
    long double a = lo, b = hi;
    long double x1 = b - r * (b - a), x2 = a + r * (b - a);
    long double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5L * (a + b);
}

inline double grid_search_min(const std::function<double(double)>& f, double lo, double hi,
                              int n) {
    double best_x = lo, best = f(lo);
    for (int i = 1; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double fx = f(x);
        if (fx < best) {
            best = fx;
            best_x = x;
        }
    }
    return best_x;
}

inline double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                                 int iters = 200) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

/// Dense symmetric solve via Gaussian elimination with partial pivoting.
inline Vec dense_solve(Dense A, Vec b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    Vec x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t k = r + 1; k < n; ++k) s -= A[r][k] * x[k];
        x[r] = s / A[r][r];
    }
    return x;
}

inline Dense dense_inverse(const Dense& A) {
    const std::size_t n = A.size();
    Dense inv(n, Vec(n, 0.0));
    for (std::size_t c = 0; c < n; ++c) {
        Vec e(n, 0.0);
        e[c] = 1.0;
        const Vec col = dense_solve(A, e);
        for (std::size_t r = 0; r < n; ++r) inv[r][c] = col[r];
    }
    return inv;
}

/// Analytic chord length of a segment clipped to an axis-aligned box.
inline double box_clip_chord(double sx, double sy, double ex, double ey, double lox,
                             double hix, double loy, double hiy) {
    const double dx = ex - sx, dy = ey - sy;
    double t0 = 0.0, t1 = 1.0;
    auto clip = [&](double p, double q) {
        if (q == 0.0) return p >= 0.0;
        const double r = -p / q;
        if (q > 0.0) {
            if (r > t1) return false;
            if (r > t0) t0 = r;
        } else {
            if (r < t0) return false;
            if (r < t1) t1 = r;
        }
        return true;
    };
    if (!clip(sx - lox, dx)) return 0.0;
    if (!clip(hix - sx, -dx)) return 0.0;
    if (!clip(sy - loy, dy)) return 0.0;
    if (!clip(hiy - sy, -dy)) return 0.0;
    if (t1 <= t0) return 0.0;
    return (t1 - t0) * std::hypot(dx, dy);
}

/// Small random sparse-ish nonnegative system for property tests.
inline vardct::SystemMatrix random_system(int n, int p, std::mt19937_64& gen,
                                          double density = 0.7) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<std::pair<std::int32_t, double>>> rows(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j)
            if (u(gen) < density) rows[i].emplace_back(j, 0.05 + u(gen));
    // ensure no empty column so every pixel is observed
    for (int j = 0; j < p; ++j) rows[j % n].emplace_back(j, 0.05 + u(gen));
    return vardct::SystemMatrix::from_rows(p, rows);
}

inline Vec random_vec(std::size_t n, std::mt19937_64& gen, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(n);
    for (double& x : v) x = u(gen);
    return v;
}

inline vardct::Sinogram make_sinogram(const Vec& y, double eta) {
    vardct::Sinogram s;
    s.y.assign(y.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) s.y[i] = static_cast<std::int64_t>(y[i]);
    s.eta.assign(y.size(), eta);
    return s;
}

}  // namespace oracle
