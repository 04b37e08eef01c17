#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace vardct {

enum class TransformKind { identity, complete, overcomplete };

enum class Neighborhood { four_conn, two_conn_hv };

enum class BoundaryMode { dirichlet, free };

/**
 * Sparse pixel-difference transform. Three kinds:
 *  - identity: K = p rows, unit diagonal.
 *  - complete: K = p rows of (pixel minus the average of its N neighbors)
 *    with Dirichlet boundary, so N is the same for every pixel and
 *    out-of-grid neighbors contribute zero.
 *  - overcomplete: horizontal rows stacked on vertical rows (K = 2p under
 *    Dirichlet boundary), each row one +1 and one -1, boundary rows a bare +1.
 * z2 = max_k sum_j |psi_kj|. Each row owns one hyperparameter slot.
 */
struct SparsifyingTransform {
    TransformKind kind = TransformKind::identity;
    std::int64_t n_rows = 0;  // K
    std::int64_t n_cols = 0;  // p
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int32_t> cols;
    std::vector<double> vals;
    double z2 = 0.0;

    void finalize_z2() {
        z2 = 0.0;
        for (std::int64_t k = 0; k < n_rows; ++k) {
            double s = 0.0;
            for (std::int64_t e = row_ptr[k]; e < row_ptr[k + 1]; ++e) s += std::abs(vals[e]);
            z2 = std::max(z2, s);
        }
    }

    // (Psi x)_k
    Vec apply(const Vec& x) const {
        require(static_cast<std::int64_t>(x.size()) == n_cols, "apply: dimension mismatch");
        Vec out(static_cast<std::size_t>(n_rows), 0.0);
        parallel_for(n_rows, [&](std::int64_t k) {
            double s = 0.0;
            for (std::int64_t e = row_ptr[k]; e < row_ptr[k + 1]; ++e)
                s += vals[e] * x[static_cast<std::size_t>(cols[e])];
            out[static_cast<std::size_t>(k)] = s;
        });
        return out;
    }

    // sum_j psi_kj^2 v_j
    Vec apply_sq(const Vec& v) const {
        require(static_cast<std::int64_t>(v.size()) == n_cols, "apply_sq: dimension mismatch");
        Vec out(static_cast<std::size_t>(n_rows), 0.0);
        parallel_for(n_rows, [&](std::int64_t k) {
            double s = 0.0;
            for (std::int64_t e = row_ptr[k]; e < row_ptr[k + 1]; ++e)
                s += vals[e] * vals[e] * v[static_cast<std::size_t>(cols[e])];
            out[static_cast<std::size_t>(k)] = s;
        });
        return out;
    }

    // f_j = sum_k psi_kj w_k
    Vec weighted_adjoint(const Vec& w) const { return adjoint_impl(w, 0); }
    // sum_k |psi_kj| w_k
    Vec weighted_adjoint_abs(const Vec& w) const { return adjoint_impl(w, 1); }
    // sum_k psi_kj^2 w_k
    Vec weighted_adjoint_sq(const Vec& w) const { return adjoint_impl(w, 2); }

  private:
    Vec adjoint_impl(const Vec& w, int mode) const {
        require(static_cast<std::int64_t>(w.size()) == n_rows,
                "weighted_adjoint: dimension mismatch");
        Vec out(static_cast<std::size_t>(n_cols), 0.0);
        for (std::int64_t k = 0; k < n_rows; ++k) {
            const double wk = w[static_cast<std::size_t>(k)];
            if (wk == 0.0) continue;
            for (std::int64_t e = row_ptr[k]; e < row_ptr[k + 1]; ++e) {
                double v = vals[e];
                if (mode == 1) v = std::abs(v);
                if (mode == 2) v = v * v;
                out[static_cast<std::size_t>(cols[e])] += v * wk;
            }
        }
        return out;
    }
};

inline SparsifyingTransform build_identity(std::int64_t p) {
    SparsifyingTransform t;
    t.kind = TransformKind::identity;
    t.n_rows = t.n_cols = p;
    t.row_ptr.resize(static_cast<std::size_t>(p) + 1);
    t.cols.resize(static_cast<std::size_t>(p));
    t.vals.assign(static_cast<std::size_t>(p), 1.0);
    for (std::int64_t k = 0; k <= p; ++k) t.row_ptr[static_cast<std::size_t>(k)] = k;
    for (std::int64_t k = 0; k < p; ++k)
        t.cols[static_cast<std::size_t>(k)] = static_cast<std::int32_t>(k);
    t.finalize_z2();
    return t;
}

/**
 * Neighbor-average rows. four_conn uses N=4 (left/right/up/down); two_conn_hv
 * uses N=2 (right and down), matching one horizontal plus one vertical
 * neighbor per pixel. Dirichlet boundary: missing neighbors count toward N
 * with value zero, so every diagonal stays 1 and row sums lie in [0, 1].
 */
inline SparsifyingTransform build_complete(const ImageGrid& grid,
                                           Neighborhood nb = Neighborhood::two_conn_hv) {
    grid.validate();
    SparsifyingTransform t;
    t.kind = TransformKind::complete;
    t.n_rows = t.n_cols = grid.pixel_count();
    t.row_ptr.assign(1, 0);
    const int N = nb == Neighborhood::four_conn ? 4 : 2;
    const double w = -1.0 / N;
    for (int r = 0; r < grid.ny; ++r) {
        for (int c = 0; c < grid.nx; ++c) {
            // entries kept in column order; diagonal always present
            std::vector<std::pair<std::int64_t, double>> entries;
            entries.emplace_back(grid.index(r, c), 1.0);
            auto add = [&](int rr, int cc) {
                if (rr >= 0 && rr < grid.ny && cc >= 0 && cc < grid.nx)
                    entries.emplace_back(grid.index(rr, cc), w);
            };
            if (nb == Neighborhood::four_conn) {
                add(r - 1, c);
                add(r + 1, c);
                add(r, c - 1);
                add(r, c + 1);
            } else {
                add(r, c + 1);
                add(r + 1, c);
            }
            std::sort(entries.begin(), entries.end());
            for (const auto& [j, v] : entries) {
                t.cols.push_back(static_cast<std::int32_t>(j));
                t.vals.push_back(v);
            }
            t.row_ptr.push_back(static_cast<std::int64_t>(t.cols.size()));
        }
    }
    t.finalize_z2();
    return t;
}

/**
 * Stacked horizontal/vertical difference rows. Under Dirichlet boundary the
 * right/bottom edge rows keep a bare +1 (difference against the implicit
 * zero outside), giving K = 2p; free boundary drops those rows.
 */
inline SparsifyingTransform build_overcomplete(const ImageGrid& grid,
                                               BoundaryMode boundary = BoundaryMode::dirichlet) {
    grid.validate();
    SparsifyingTransform t;
    t.kind = TransformKind::overcomplete;
    t.n_cols = grid.pixel_count();
    t.row_ptr.assign(1, 0);
    auto push_row = [&](std::int64_t j, std::int64_t j_nb) {
        t.cols.push_back(static_cast<std::int32_t>(j));
        t.vals.push_back(1.0);
        if (j_nb >= 0) {
            t.cols.push_back(static_cast<std::int32_t>(j_nb));
            t.vals.push_back(-1.0);
        }
        t.row_ptr.push_back(static_cast<std::int64_t>(t.cols.size()));
    };
    const bool keep_boundary = boundary == BoundaryMode::dirichlet;
    for (int r = 0; r < grid.ny; ++r)
        for (int c = 0; c < grid.nx; ++c) {
            if (c + 1 < grid.nx)
                push_row(grid.index(r, c), grid.index(r, c + 1));
            else if (keep_boundary)
                push_row(grid.index(r, c), -1);
        }
    for (int r = 0; r < grid.ny; ++r)
        for (int c = 0; c < grid.nx; ++c) {
            if (r + 1 < grid.ny)
                push_row(grid.index(r, c), grid.index(r + 1, c));
            else if (keep_boundary)
                push_row(grid.index(r, c), -1);
        }
    t.n_rows = static_cast<std::int64_t>(t.row_ptr.size()) - 1;
    t.finalize_z2();
    return t;
}

}  // namespace vardct
