#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "vardct/phantom.hpp"
#include "vardct/random.hpp"
#include "vardct/simulate.hpp"
#include "vardct/system_matrix.hpp"

using namespace vardct;

TEST_CASE("poisson sampler moments") {
    // sample mean within 5 sigma of the rate; sample variance within 5 sigma
    // of its asymptotic spread sqrt((mu4 - var^2)/n), mu4 = 3r^2 + r
    const int n = 100000;
    for (double rate : {0.5, 5.0, 500.0}) {
        Rng rng(1234, static_cast<std::uint64_t>(rate * 100));
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double k = static_cast<double>(poisson_sample(rate, rng));
            s += k;
            s2 += k * k;
        }
        const double mean = s / n;
        const double var = s2 / n - mean * mean;
        const double mean_sigma = std::sqrt(rate / n);
        // Var(sample var) ~ (mu4 - sigma^4)/n with Poisson mu4 = r + 3r^2
        const double var_sigma = std::sqrt((rate + 2.0 * rate * rate) / n);
        CHECK(std::abs(mean - rate) < 5.0 * mean_sigma);
        CHECK(std::abs(var - rate) < 5.0 * var_sigma);
    }
}

TEST_CASE("poisson sampler empirical mean at rate 20") {
    Rng rng(77, 0);
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += static_cast<double>(poisson_sample(20.0, rng));
    const double mean = s / n;
    CHECK(std::abs(mean - 20.0) < 3.0 * std::sqrt(20.0 / n));
}

TEST_CASE("shepp-logan rasterization") {
    ImageGrid grid;
    grid.nx = grid.ny = 256;
    grid.pixel_size = 0.1;
    const Vec img = shepp_logan(grid);

    double lo = 1e9, hi = -1e9;
    for (double v : img) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);

    SECTION("pixels outside the outer ellipse stay at zero") {
        const auto ph = shepp_logan_ellipses();
        for (int r = 0; r < grid.ny; r += 7)
            for (int c = 0; c < grid.nx; c += 7) {
                const double x = (grid.center_x(c) - grid.origin_x) / (0.5 * grid.width());
                const double y = (grid.center_y(r) - grid.origin_y) / (0.5 * grid.height());
                if (!inside(ph[0], x, y))
                    CHECK(img[static_cast<std::size_t>(grid.index(r, c))] == 0.0);
            }
    }
}

TEST_CASE("shepp-logan matches a supersampled oracle on decided pixels") {
    ImageGrid grid;
    grid.nx = grid.ny = 64;
    grid.pixel_size = 0.4;
    const Vec img = shepp_logan(grid);
    const auto ph = shepp_logan_ellipses();

    // 4x supersampling; where all 16 subsamples agree the pixel is wholly
    // inside or outside every ellipse, so its center value must match
    double sum_img = 0.0, sum_oracle = 0.0;
    int decided = 0;
    for (int r = 0; r < grid.ny; ++r)
        for (int c = 0; c < grid.nx; ++c) {
            const double px = grid.center_x(c), py = grid.center_y(r);
            double first = 0.0;
            bool agree = true;
            for (int sr = 0; sr < 4 && agree; ++sr)
                for (int sc = 0; sc < 4 && agree; ++sc) {
                    const double x =
                        (px + (sc - 1.5) * grid.pixel_size / 4.0 - grid.origin_x) /
                        (0.5 * grid.width());
                    const double y =
                        (py + (sr - 1.5) * grid.pixel_size / 4.0 - grid.origin_y) /
                        (0.5 * grid.height());
                    const double val = std::clamp(phantom_value(ph, x, y), 0.0, 1.0);
                    if (sr == 0 && sc == 0)
                        first = val;
                    else if (val != first)
                        agree = false;
                }
            if (!agree) continue;
            ++decided;
            sum_img += img[static_cast<std::size_t>(grid.index(r, c))];
            sum_oracle += first;
        }
    CHECK(decided > 3000);  // most of the 4096 pixels are interior
    CHECK(sum_img == Catch::Approx(sum_oracle).margin(1e-9));
}

TEST_CASE("sinogram sampling") {
    auto geom = FanBeamGeometry::full_scan(100.0, 400.0, 102.4 / 32, 32, 48);
    ImageGrid grid;
    grid.nx = grid.ny = 16;
    grid.pixel_size = 25.6 / 16;
    const auto A = build_system_matrix(geom, grid);

    SECTION("zero image gives rate eta everywhere") {
        const Vec rates = expected_rates(A, Vec(static_cast<std::size_t>(A.n_cols), 0.0),
                                         Vec(static_cast<std::size_t>(A.n_rows), 50.0));
        for (double r : rates) CHECK(r == Catch::Approx(50.0));
    }
    SECTION("identical seeds give identical sinograms, thread count irrelevant") {
        const Vec x(static_cast<std::size_t>(A.n_cols), 0.3);
        set_threads(1);
        const auto s1 = sample_sinogram(A, x, 1e4, 99);
        set_threads(2);
        const auto s2 = sample_sinogram(A, x, 1e4, 99);
        set_threads(1);
        const auto s3 = sample_sinogram(A, x, 1e4, 100);
        CHECK(s1.y == s2.y);
        CHECK(s1.y != s3.y);
    }
    SECTION("high flux keeps every count positive") {
        const Vec x = shepp_logan(grid);
        const auto s = sample_sinogram(A, x, 1e5, 5);
        std::int64_t lo = 1;
        for (auto y : s.y) lo = std::min(lo, y);
        CHECK(lo > 0);
    }
    SECTION("nonpositive eta is rejected") {
        CHECK_THROWS_AS(sample_sinogram(A, Vec(static_cast<std::size_t>(A.n_cols), 0.0), 0.0, 1),
                        validation_error);
    }
}

TEST_CASE("post-log transform") {
    Sinogram s;
    s.y = {100, 0, 36};
    s.eta = {100.0, 100.0, 36.0 * std::exp(1.0)};
    const auto pl = post_log(s);
    CHECK(pl.values[0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(pl.values[1] == Catch::Approx(std::log(100.0)));
    CHECK(pl.weights[1] == 1.0);
    CHECK(pl.values[2] == Catch::Approx(1.0));
    CHECK(pl.weights[2] == 36.0);
}

TEST_CASE("letters phantom is sparse") {
    ImageGrid grid;
    grid.nx = grid.ny = 64;
    grid.pixel_size = 0.4;
    const Vec img = letters_phantom(grid);
    int nz = 0;
    for (double v : img)
        if (v != 0.0) ++nz;
    CHECK(nz > 100);
    CHECK(nz < 64 * 64 / 3);
}
