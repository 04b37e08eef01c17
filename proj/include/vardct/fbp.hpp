#pragma once

#include <cmath>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"
#include "simulate.hpp"

namespace vardct {

/**
 * Filtered backprojection for the flat-panel fan geometry, reference quality
 * only: post-log data, cosine weighting, cropped Ram-Lak kernel applied on
 * the virtual detector through the isocenter, then distance-weighted
 * backprojection with linear interpolation.
 */
inline Vec fbp_reconstruct(const FanBeamGeometry& geom, const ImageGrid& grid,
                           const Vec& postlog) {
    geom.validate();
    grid.validate();
    const int nv = geom.n_views;
    const int nd = geom.n_detectors;
    require(static_cast<std::int64_t>(postlog.size()) == geom.ray_count(),
            "fbp: data size mismatch");

    const double rho = geom.source_to_isocenter;
    const double mag = rho / geom.source_to_detector;  // panel -> virtual detector
    const double ds = geom.detector_pitch * mag;
    const double half = 0.5 * (nd - 1);

    // virtual-detector coordinates and cosine weights
    Vec s_coord(nd), cosw(nd);
    for (int d = 0; d < nd; ++d) {
        s_coord[d] = ((d - half) * geom.detector_pitch + geom.detector_offset) * mag;
        cosw[d] = rho / std::sqrt(rho * rho + s_coord[d] * s_coord[d]);
    }

    // discrete ramp kernel, cropped at the panel width
    Vec kernel(2 * nd - 1, 0.0);
    for (int n = -(nd - 1); n <= nd - 1; ++n) {
        double h = 0.0;
        if (n == 0)
            h = 1.0 / (4.0 * ds * ds);
        else if (n % 2 != 0)
            h = -1.0 / (kPi * kPi * n * n * ds * ds);
        kernel[n + nd - 1] = h;
    }

    std::vector<Vec> filtered(nv, Vec(nd, 0.0));
    parallel_for(nv, [&](std::int64_t v) {
        Vec w(nd);
        for (int d = 0; d < nd; ++d)
            w[d] = postlog[static_cast<std::size_t>(v) * nd + d] * cosw[d];
        for (int d = 0; d < nd; ++d) {
            double acc = 0.0;
            for (int dd = 0; dd < nd; ++dd) acc += w[dd] * kernel[d - dd + nd - 1];
            filtered[static_cast<std::size_t>(v)][d] = acc * ds;
        }
    });

    // spacing of the view angles (uniform full scan assumed for the weight)
    const double dbeta = 2.0 * kPi / nv;
    Vec img(static_cast<std::size_t>(grid.pixel_count()), 0.0);
    parallel_for(grid.ny, [&](std::int64_t r) {
        for (int c = 0; c < grid.nx; ++c) {
            const double x = grid.center_x(c);
            const double y = grid.center_y(static_cast<int>(r));
            double acc = 0.0;
            for (int v = 0; v < nv; ++v) {
                const double beta = geom.view_angles[v];
                const double cb = std::cos(beta), sb = std::sin(beta);
                const double L = rho - x * cb - y * sb;  // distance along the central ray
                if (L <= 1e-9) continue;
                const double s = rho * (y * cb - x * sb) / L;
                const double rel = (s - s_coord[0]) / ds;
                const int k = static_cast<int>(std::floor(rel));
                if (k < 0 || k >= nd - 1) continue;
                const double frac = rel - k;
                const double q =
                    (1.0 - frac) * filtered[v][k] + frac * filtered[v][k + 1];
                const double u = L / rho;
                acc += q / (u * u);
            }
            // half weight: a full 2pi scan measures every line twice
            img[static_cast<std::size_t>(grid.index(static_cast<int>(r), c))] =
                0.5 * acc * dbeta / grid.mu_ref;
        }
    });
    return img;
}

inline Vec fbp_reconstruct(const FanBeamGeometry& geom, const ImageGrid& grid,
                           const Sinogram& sino) {
    return fbp_reconstruct(geom, grid, post_log(sino).values);
}

}  // namespace vardct
