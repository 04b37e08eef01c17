#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace vardct {

/// Ellipse in normalized phantom coordinates ([-1,1]^2 mapped to the grid).
struct Ellipse {
    double value;    // additive attenuation, dimensionless relative units
    double a, b;     // semi-axes
    double x0, y0;   // center
    double phi;      // rotation, radians
};

using Phantom = std::vector<Ellipse>;

enum class SheppLoganVariant { modified, classic };

inline Phantom shepp_logan_ellipses(SheppLoganVariant variant = SheppLoganVariant::modified) {
    const double d = kPi / 180.0;
    // Toft's tabulation; the modified variant rescales intensities to [0, 1].
    Phantom mod = {
        {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
        {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
        {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0 * d},
        {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0 * d},
        {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
        {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
        {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
        {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
    };
    if (variant == SheppLoganVariant::classic) {
        const double vals[] = {2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01};
        for (std::size_t i = 0; i < mod.size(); ++i) mod[i].value = vals[i];
    }
    return mod;
}

inline bool inside(const Ellipse& e, double x, double y) {
    const double c = std::cos(e.phi), s = std::sin(e.phi);
    const double dx = x - e.x0, dy = y - e.y0;
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0;
}

inline double phantom_value(const Phantom& ph, double x, double y) {
    double val = 0.0;
    for (const auto& e : ph)
        if (inside(e, x, y)) val += e.value;
    return val;
}

/// Pixel-center rasterization in normalized coordinates (grid half-width = 1).
inline Vec rasterize(const Phantom& ph, const ImageGrid& grid) {
    grid.validate();
    Vec img(static_cast<std::size_t>(grid.pixel_count()), 0.0);
    const double sx = 2.0 / grid.width();
    const double sy = 2.0 / grid.height();
    parallel_for(grid.ny, [&](std::int64_t r) {
        for (int c = 0; c < grid.nx; ++c) {
            const double x = (grid.center_x(c) - grid.origin_x) * sx;
            const double y = (grid.center_y(static_cast<int>(r)) - grid.origin_y) * sy;
            img[static_cast<std::size_t>(grid.index(static_cast<int>(r), c))] =
                phantom_value(ph, x, y);
        }
    });
    return img;
}

/// Shepp-Logan attenuation map (relative units), clipped to [0, 1].
inline Vec shepp_logan(const ImageGrid& grid,
                       SheppLoganVariant variant = SheppLoganVariant::modified) {
    Vec img = rasterize(shepp_logan_ellipses(variant), grid);
    for (double& v : img) v = std::clamp(v, 0.0, 1.0);
    return img;
}

/**
 * Block-letter phantom, sparse in the pixel basis. Strokes are axis-aligned
 * bars in normalized coordinates; default spells "CT".
 */
inline Vec letters_phantom(const ImageGrid& grid, double value = 1.458) {
    grid.validate();
    struct Bar {
        double x0, x1, y0, y1;
    };
    const std::vector<Bar> bars = {
        // C
        {-0.75, -0.60, -0.45, 0.45},
        {-0.75, -0.15, 0.30, 0.45},
        {-0.75, -0.15, -0.45, -0.30},
        // T
        {0.10, 0.75, 0.30, 0.45},
        {0.35, 0.50, -0.45, 0.30},
    };
    Vec img(static_cast<std::size_t>(grid.pixel_count()), 0.0);
    const double sx = 2.0 / grid.width();
    const double sy = 2.0 / grid.height();
    for (int r = 0; r < grid.ny; ++r)
        for (int c = 0; c < grid.nx; ++c) {
            const double x = (grid.center_x(c) - grid.origin_x) * sx;
            const double y = (grid.center_y(r) - grid.origin_y) * sy;
            for (const auto& b : bars)
                if (x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1) {
                    img[static_cast<std::size_t>(grid.index(r, c))] = value;
                    break;
                }
        }
    return img;
}

}  // namespace vardct
