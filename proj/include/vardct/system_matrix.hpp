#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace vardct {

/**
 * Sparse ray/pixel intersection matrix in compressed-row layout. Entry (i, j)
 * is the chord length of ray i inside pixel j (mm) scaled by grid.mu_ref, so
 * images are dimensionless. Squared entries are derived as vals[k]*vals[k],
 * which is the exact elementwise square. z1 and z_mle are the row-sum
 * constants used by the separable surrogates:
 *   z1    = max_i sum_j (phi_ij + phi_ij^2 / 2)
 *   z_mle = max_i sum_j phi_ij
 */
struct SystemMatrix {
    std::int64_t n_rows = 0;  // measurements
    std::int64_t n_cols = 0;  // pixels
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int32_t> cols;
    std::vector<double> vals;
    double z1 = 0.0;
    double z_mle = 0.0;
    std::vector<std::uint8_t> col_support;  // 1 if the column has any nonzero

    std::int64_t nnz() const { return static_cast<std::int64_t>(vals.size()); }

    void finalize_constants() {
        z1 = 0.0;
        z_mle = 0.0;
        col_support.assign(static_cast<std::size_t>(n_cols), 0);
        for (std::int64_t i = 0; i < n_rows; ++i) {
            double s = 0.0, s1 = 0.0;
            for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
                const double v = vals[k];
                s += v;
                s1 += v + 0.5 * v * v;
                col_support[static_cast<std::size_t>(cols[k])] = 1;
            }
            z_mle = std::max(z_mle, s);
            z1 = std::max(z1, s1);
        }
    }

    /// Constructor from explicit rows of (col, value) pairs. Rows are stored
    /// in column order with duplicate columns merged, so each (i, j) has one
    /// entry and squaring entries is the elementwise square of the matrix.
    static SystemMatrix from_rows(
        std::int64_t n_cols,
        const std::vector<std::vector<std::pair<std::int32_t, double>>>& rows) {
        SystemMatrix A;
        A.n_rows = static_cast<std::int64_t>(rows.size());
        A.n_cols = n_cols;
        A.row_ptr.assign(1, 0);
        for (const auto& r : rows) {
            auto sorted = r;
            std::sort(sorted.begin(), sorted.end());
            for (const auto& [c, v] : sorted) {
                require(c >= 0 && c < n_cols, "from_rows: column out of range");
                require(v >= 0.0, "from_rows: negative entry");
                if (!A.cols.empty() &&
                    static_cast<std::int64_t>(A.cols.size()) > A.row_ptr.back() &&
                    A.cols.back() == c) {
                    A.vals.back() += v;
                } else {
                    A.cols.push_back(c);
                    A.vals.push_back(v);
                }
            }
            A.row_ptr.push_back(static_cast<std::int64_t>(A.cols.size()));
        }
        A.finalize_constants();
        return A;
    }

    // p_i = sum_j phi_ij x_j
    Vec forward(const Vec& x) const {
        require(static_cast<std::int64_t>(x.size()) == n_cols, "forward: dimension mismatch");
        Vec out(static_cast<std::size_t>(n_rows), 0.0);
        parallel_for(n_rows, [&](std::int64_t i) {
            double s = 0.0;
            for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
                s += vals[k] * x[static_cast<std::size_t>(cols[k])];
            out[static_cast<std::size_t>(i)] = s;
        });
        return out;
    }

    // p~_i = sum_j phi_ij^2 v_j
    Vec forward_sq(const Vec& v) const {
        require(static_cast<std::int64_t>(v.size()) == n_cols, "forward_sq: dimension mismatch");
        Vec out(static_cast<std::size_t>(n_rows), 0.0);
        parallel_for(n_rows, [&](std::int64_t i) {
            double s = 0.0;
            for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
                s += vals[k] * vals[k] * v[static_cast<std::size_t>(cols[k])];
            out[static_cast<std::size_t>(i)] = s;
        });
        return out;
    }

    Vec back(const Vec& w) const { return back_impl(w, false); }
    Vec back_sq(const Vec& w) const { return back_impl(w, true); }

  private:
    // Accumulates per-thread partial images, merged in fixed thread order.
    Vec back_impl(const Vec& w, bool squared) const {
        require(static_cast<std::int64_t>(w.size()) == n_rows, "back: dimension mismatch");
        const int nt = thread_count();
        if (nt <= 1) {
            Vec out(static_cast<std::size_t>(n_cols), 0.0);
            accumulate_rows(w, squared, 0, n_rows, out);
            return out;
        }
        std::vector<Vec> partial(static_cast<std::size_t>(nt),
                                 Vec(static_cast<std::size_t>(n_cols), 0.0));
        const std::int64_t chunk = (n_rows + nt - 1) / nt;
        parallel_for(nt, [&](std::int64_t t) {
            const std::int64_t lo = t * chunk;
            const std::int64_t hi = std::min<std::int64_t>(n_rows, lo + chunk);
            if (lo < hi) accumulate_rows(w, squared, lo, hi, partial[static_cast<std::size_t>(t)]);
        });
        Vec out(static_cast<std::size_t>(n_cols), 0.0);
        for (int t = 0; t < nt; ++t)
            for (std::int64_t j = 0; j < n_cols; ++j)
                out[static_cast<std::size_t>(j)] += partial[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
        return out;
    }

    void accumulate_rows(const Vec& w, bool squared, std::int64_t lo, std::int64_t hi,
                         Vec& acc) const {
        for (std::int64_t i = lo; i < hi; ++i) {
            const double wi = w[static_cast<std::size_t>(i)];
            if (wi == 0.0) continue;
            for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
                const double v = vals[k];
                acc[static_cast<std::size_t>(cols[k])] += (squared ? v * v : v) * wi;
            }
        }
    }
};

namespace detail {

// Chord lengths of one segment against the grid, via incremental parametric
// traversal. Zero-length corner crossings are assigned to no pixel.
inline void trace_segment(const ImageGrid& grid, const RaySegment& ray,
                          std::vector<std::pair<std::int32_t, double>>& out) {
    out.clear();
    const double dx = ray.ex - ray.sx;
    const double dy = ray.ey - ray.sy;
    const double len = std::hypot(dx, dy);
    if (len <= 0.0) return;

    // clip [0,1] parameter range against the grid bounding box
    double t0 = 0.0, t1 = 1.0;
    const double lox = grid.min_x(), hix = grid.max_x();
    const double loy = grid.min_y(), hiy = grid.max_y();
    auto clip = [&](double p, double q) {
        // moving from p by q*t; keep p + q*t >= 0
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
    if (!clip(ray.sx - lox, dx)) return;
    if (!clip(hix - ray.sx, -dx)) return;
    if (!clip(ray.sy - loy, dy)) return;
    if (!clip(hiy - ray.sy, -dy)) return;
    if (t1 <= t0) return;

    const double inv_ps = 1.0 / grid.pixel_size;
    auto col_of = [&](double x) {
        int c = static_cast<int>(std::floor((x - lox) * inv_ps));
        return std::clamp(c, 0, grid.nx - 1);
    };
    auto row_of = [&](double y) {
        int r = static_cast<int>(std::floor((hiy - y) * inv_ps));
        return std::clamp(r, 0, grid.ny - 1);
    };

    // Entry-point cell. If the entry sits exactly on a pixel edge the first
    // traversal interval degenerates to zero length and is skipped.
    int col = col_of(ray.sx + t0 * dx);
    int row = row_of(ray.sy + t0 * dy);

    const int step_col = dx > 0.0 ? 1 : -1;
    const int step_row = dy > 0.0 ? -1 : 1;  // rows decrease as y grows
    const double inf = std::numeric_limits<double>::infinity();

    // parameter value at which the path leaves the current column/row
    auto next_tx = [&](int c) {
        if (dx == 0.0) return inf;
        const double edge = lox + (dx > 0.0 ? c + 1 : c) * grid.pixel_size;
        return (edge - ray.sx) / dx;
    };
    auto next_ty = [&](int r) {
        if (dy == 0.0) return inf;
        const double edge = hiy - (dy > 0.0 ? r : r + 1) * grid.pixel_size;
        return (edge - ray.sy) / dy;
    };

    double t = t0;
    double tx = next_tx(col);
    double ty = next_ty(row);
    const double scale = len * grid.mu_ref;
    while (t < t1) {
        const double t_exit = std::min(std::min(tx, ty), t1);
        const double chord = (t_exit - t) * scale;
        if (chord > 0.0)
            out.emplace_back(static_cast<std::int32_t>(grid.index(row, col)), chord);
        if (t_exit >= t1) break;
        if (tx <= ty) {
            col += step_col;
            if (col < 0 || col >= grid.nx) break;
            tx = next_tx(col);
        } else {
            row += step_row;
            if (row < 0 || row >= grid.ny) break;
            ty = next_ty(row);
        }
        t = t_exit;
    }
}

}  // namespace detail

/**
 * Ray-traces the system matrix for a geometry/grid pair. Rows are built
 * independently (parallel over rays) and the result is identical for any
 * thread count. Rays missing the grid yield empty rows; it is an error if
 * every row is empty.
 */
inline SystemMatrix build_system_matrix(const FanBeamGeometry& geom, const ImageGrid& grid) {
    geom.validate();
    grid.validate();
    const auto rays = enumerate_rays(geom);
    const std::int64_t n = static_cast<std::int64_t>(rays.size());

    std::vector<std::vector<std::pair<std::int32_t, double>>> rows(static_cast<std::size_t>(n));
    parallel_for(n, [&](std::int64_t i) {
        detail::trace_segment(grid, rays[static_cast<std::size_t>(i)],
                              rows[static_cast<std::size_t>(i)]);
    });

    SystemMatrix A = SystemMatrix::from_rows(grid.pixel_count(), rows);
    require(A.nnz() > 0, "build_system_matrix: no ray intersects the grid");
    return A;
}

}  // namespace vardct
