#pragma once

#include <cmath>
#include <vector>

#include "core.hpp"

namespace vardct {

inline constexpr double kPi = 3.14159265358979323846;

/**
 * 2D fan-beam geometry with a flat detector panel.
 *
 * Conventions: at view angle 0 the source sits on the +x axis at distance
 * source_to_isocenter from the origin (isocenter); view angles increase
 * counterclockwise. The panel is perpendicular to the central ray at
 * source_to_detector from the source, and detector positions run along the
 * tangential direction with detector_offset shifting the whole panel.
 */
struct FanBeamGeometry {
    double source_to_isocenter = 100.0;  // mm
    double source_to_detector = 400.0;   // mm
    double detector_pitch = 0.2;         // mm
    int n_detectors = 1;
    int n_views = 1;
    std::vector<double> view_angles;     // radians, strictly increasing in [0, 2pi)
    double detector_offset = 0.0;        // mm

    static FanBeamGeometry full_scan(double rho, double sdd, double pitch, int ndet,
                                     int nviews, double offset = 0.0) {
        FanBeamGeometry g;
        g.source_to_isocenter = rho;
        g.source_to_detector = sdd;
        g.detector_pitch = pitch;
        g.n_detectors = ndet;
        g.n_views = nviews;
        g.detector_offset = offset;
        g.view_angles.resize(nviews);
        for (int k = 0; k < nviews; ++k) g.view_angles[k] = 2.0 * kPi * k / nviews;
        g.validate();
        return g;
    }

    /// Returns a copy keeping every `factor`-th view (missing-data studies).
    FanBeamGeometry subsample_views(int factor) const {
        require(factor >= 1, "view subsample factor must be >= 1");
        FanBeamGeometry g = *this;
        g.view_angles.clear();
        for (int k = 0; k < n_views; k += factor) g.view_angles.push_back(view_angles[k]);
        g.n_views = static_cast<int>(g.view_angles.size());
        return g;
    }

    std::int64_t ray_count() const {
        return static_cast<std::int64_t>(n_views) * n_detectors;
    }

    void validate() const {
        require(source_to_detector > source_to_isocenter && source_to_isocenter > 0.0,
                "geometry: need source_to_detector > source_to_isocenter > 0");
        require(detector_pitch > 0.0, "geometry: detector_pitch must be positive");
        require(n_detectors >= 1 && n_views >= 1, "geometry: need at least one detector and view");
        require(static_cast<int>(view_angles.size()) == n_views,
                "geometry: view_angles size must equal n_views");
        for (int k = 0; k < n_views; ++k) {
            require(view_angles[k] >= 0.0 && view_angles[k] < 2.0 * kPi,
                    "geometry: view angles must lie in [0, 2pi)");
            if (k > 0)
                require(view_angles[k] > view_angles[k - 1],
                        "geometry: view angles must be strictly increasing");
        }
    }
};

/**
 * Pixel lattice for the reconstruction. Lexicographic index j = row*nx + col
 * with row 0 at the top (largest y) and col 0 at the smallest x; the grid
 * center sits at `origin`. mu_ref is the reference linear attenuation
 * absorbed into the system matrix so images are dimensionless.
 */
struct ImageGrid {
    int nx = 1, ny = 1;
    double pixel_size = 1.0;  // mm
    double origin_x = 0.0, origin_y = 0.0;
    double mu_ref = 0.02;  // 1/mm, water-like reference

    std::int64_t pixel_count() const { return static_cast<std::int64_t>(nx) * ny; }
    double width() const { return nx * pixel_size; }
    double height() const { return ny * pixel_size; }
    double min_x() const { return origin_x - 0.5 * width(); }
    double max_x() const { return origin_x + 0.5 * width(); }
    double min_y() const { return origin_y - 0.5 * height(); }
    double max_y() const { return origin_y + 0.5 * height(); }

    std::int64_t index(int row, int col) const {
        return static_cast<std::int64_t>(row) * nx + col;
    }
    double center_x(int col) const { return min_x() + (col + 0.5) * pixel_size; }
    double center_y(int row) const { return max_y() - (row + 0.5) * pixel_size; }

    void validate() const {
        require(nx >= 1 && ny >= 1, "grid: nx, ny must be >= 1");
        require(pixel_size > 0.0, "grid: pixel_size must be positive");
        require(mu_ref > 0.0, "grid: mu_ref must be positive");
    }
};

/// Straight segment from the source point to a detector-pixel center.
struct RaySegment {
    double sx, sy;  // source
    double ex, ey;  // detector pixel center
};

/// All source/detector segments, view-major then detector. Deterministic.
inline std::vector<RaySegment> enumerate_rays(const FanBeamGeometry& geom) {
    geom.validate();
    std::vector<RaySegment> rays;
    rays.reserve(static_cast<std::size_t>(geom.ray_count()));
    const double half = 0.5 * (geom.n_detectors - 1);
    for (int v = 0; v < geom.n_views; ++v) {
        const double beta = geom.view_angles[v];
        const double cb = std::cos(beta), sb = std::sin(beta);
        const double sx = geom.source_to_isocenter * cb;
        const double sy = geom.source_to_isocenter * sb;
        // panel center along the central ray, tangential unit vector (-sb, cb)
        const double pcx = sx - geom.source_to_detector * cb;
        const double pcy = sy - geom.source_to_detector * sb;
        for (int d = 0; d < geom.n_detectors; ++d) {
            const double u = (d - half) * geom.detector_pitch + geom.detector_offset;
            rays.push_back({sx, sy, pcx - u * sb, pcy + u * cb});
        }
    }
    return rays;
}

}  // namespace vardct
