#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vardct/sbl.hpp"

using namespace vardct;

TEST_CASE("conjugate gradients") {
    SECTION("identity operator returns the right-hand side immediately") {
        auto ident = [](const Vec& x, Vec& out) { out = x; };
        const Vec rhs = {1.0, -2.0, 3.0};
        const auto res = cg_solve(ident, rhs, 1e-12, 50);
        CHECK(res.converged);
        CHECK(res.iters <= 1);
        for (std::size_t i = 0; i < rhs.size(); ++i)
            CHECK(res.x[i] == Catch::Approx(rhs[i]).epsilon(1e-12));
    }
    SECTION("two-by-two system") {
        auto apply = [](const Vec& x, Vec& out) {
            out = {2.0 * x[0] + x[1], x[0] + 3.0 * x[1]};
        };
        const auto res = cg_solve(apply, {1.0, 1.0}, 1e-13, 50);
        CHECK(res.converged);
        CHECK(res.x[0] == Catch::Approx(0.4).epsilon(1e-10));
        CHECK(res.x[1] == Catch::Approx(0.2).epsilon(1e-10));
    }
    SECTION("final residual honours the threshold") {
        std::mt19937_64 gen(1);
        oracle::Dense M(6, Vec(6, 0.0));
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < i; ++j) M[i][j] = M[j][i] = 0.1;
            M[i][i] = 2.0 + static_cast<double>(i);
        }
        auto apply = [&](const Vec& x, Vec& out) { out = oracle::dense_matvec(M, x); };
        const Vec rhs = oracle::random_vec(6, gen, -1.0, 1.0);
        const auto res = cg_solve(apply, rhs, 1e-9, 100);
        REQUIRE(res.converged);
        Vec r(6);
        apply(res.x, r);
        double nrm = 0.0;
        for (std::size_t i = 0; i < 6; ++i) nrm += (rhs[i] - r[i]) * (rhs[i] - r[i]);
        CHECK(std::sqrt(nrm) <= 1e-9);
    }
}

namespace {
struct GaussInstance {
    SystemMatrix A;
    SparsifyingTransform T;
    Sinogram sino;
};

GaussInstance make_gauss_4x4(std::uint64_t seed = 17) {
    GaussInstance inst;
    ImageGrid grid;
    grid.nx = grid.ny = 4;
    grid.pixel_size = 25.6 / 4;
    const auto geom = FanBeamGeometry::full_scan(100.0, 400.0, 102.4 / 8, 8, 16);
    inst.A = build_system_matrix(geom, grid);
    inst.T = build_complete(grid, Neighborhood::two_conn_hv);
    std::mt19937_64 gen(seed);
    const Vec x = oracle::random_vec(static_cast<std::size_t>(inst.A.n_cols), gen, 0.0, 0.8);
    inst.sino = sample_sinogram(inst.A, x, 1e4, seed);
    return inst;
}

oracle::Dense dense_normal_matrix(const GaussInstance& inst, const Vec& gamma) {
    const auto Phi = oracle::densify(inst.A);
    const auto Psi = oracle::densify(inst.T);
    const auto data = post_log(inst.sino);
    const std::size_t p = Phi[0].size();
    oracle::Dense P(p, Vec(p, 0.0));
    for (std::size_t i = 0; i < Phi.size(); ++i)
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b)
                P[a][b] += data.weights[i] * Phi[i][a] * Phi[i][b];
    for (std::size_t k = 0; k < Psi.size(); ++k)
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b)
                P[a][b] += Psi[k][a] * Psi[k][b] / gamma[k];
    return P;
}
}  // namespace

TEST_CASE("posterior operator and mean solve") {
    const auto inst = make_gauss_4x4();
    std::mt19937_64 gen(8);
    const Vec gamma = oracle::random_vec(static_cast<std::size_t>(inst.T.n_rows), gen, 0.5,
                                         20.0);
    const auto data = post_log(inst.sino);

    SECTION("matrix-free application equals the dense normal matrix") {
        const auto P = dense_normal_matrix(inst, gamma);
        const auto op = make_postlog_operator(inst.A, inst.T, data.weights, gamma);
        const Vec x = oracle::random_vec(static_cast<std::size_t>(inst.A.n_cols), gen, -1.0,
                                         1.0);
        Vec got;
        op.apply(x, got);
        const Vec want = oracle::dense_matvec(P, x);
        for (std::size_t j = 0; j < got.size(); ++j)
            CHECK(got[j] == Catch::Approx(want[j]).epsilon(1e-12));
    }
    SECTION("mean solve matches a dense direct solve") {
        SblConfig cfg;
        const auto res = sbl_mean(gamma, inst.A, inst.T, data, cfg);
        REQUIRE(res.converged);
        const auto P = dense_normal_matrix(inst, gamma);
        Vec wy(data.values.size());
        for (std::size_t i = 0; i < wy.size(); ++i) wy[i] = data.weights[i] * data.values[i];
        const Vec rhs = inst.A.back(wy);
        const Vec want = oracle::dense_solve(P, rhs);
        for (std::size_t j = 0; j < want.size(); ++j)
            CHECK(res.x[j] == Catch::Approx(want[j]).epsilon(1e-6).margin(1e-9));
    }
    SECTION("identity system with wide-open prior returns the data") {
        auto A = SystemMatrix::from_rows(
            3, {{{0, 1.0}}, {{1, 1.0}}, {{2, 1.0}}});
        auto T = build_identity(3);
        PostLogData d;
        d.values = {0.5, -0.2, 0.9};
        d.weights = {1.0, 1.0, 1.0};
        SblConfig cfg;
        const auto res = sbl_mean(Vec(3, 1e12), A, T, d, cfg);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(res.x[j] == Catch::Approx(d.values[j]).margin(1e-6));
    }
    SECTION("shrinking one prior slot pulls its coefficient to zero") {
        Vec g2 = gamma;
        const auto m1 = sbl_mean(g2, inst.A, inst.T, data, SblConfig{});
        g2[5] = 1e-9;
        const auto m2 = sbl_mean(g2, inst.A, inst.T, data, SblConfig{});
        const double c1 = std::abs(inst.T.apply(m1.x)[5]);
        const double c2 = std::abs(inst.T.apply(m2.x)[5]);
        CHECK(c2 < 0.05 * c1 + 1e-12);
    }
}

TEST_CASE("posterior variance diagonal") {
    SECTION("identity posterior gives unit variances") {
        auto A = SystemMatrix::from_rows(2, {{{0, 1.0}}, {{1, 1.0}}});
        auto T = build_identity(2);
        // P = diag(w) + diag(1/gamma) = I with w = 1/2, gamma = 2
        SblConfig cfg;
        const auto res = sbl_variance_diag(Vec(2, 2.0), A, T, Vec(2, 0.5), cfg);
        CHECK(res.diag[0] == Catch::Approx(1.0).epsilon(1e-10));
        CHECK(res.diag[1] == Catch::Approx(1.0).epsilon(1e-10));
    }
    SECTION("dense inverse oracle, both modes") {
        const auto inst = make_gauss_4x4();
        std::mt19937_64 gen(9);
        const Vec gamma = oracle::random_vec(static_cast<std::size_t>(inst.T.n_rows), gen,
                                             0.5, 10.0);
        const auto data = post_log(inst.sino);
        const auto P = dense_normal_matrix(inst, gamma);
        const auto Pinv = oracle::dense_inverse(P);
        const auto Psi = oracle::densify(inst.T);
        Vec want(static_cast<std::size_t>(inst.T.n_rows), 0.0);
        for (std::size_t k = 0; k < Psi.size(); ++k)
            for (std::size_t a = 0; a < Psi[k].size(); ++a)
                for (std::size_t b = 0; b < Psi[k].size(); ++b)
                    want[k] += Psi[k][a] * Pinv[a][b] * Psi[k][b];

        SblConfig exact;
        exact.variance_mode = SblConfig::VarianceMode::exact_small;
        const auto r1 = sbl_variance_diag(gamma, inst.A, inst.T, data.weights, exact);
        SblConfig cgm;
        cgm.variance_mode = SblConfig::VarianceMode::cg_columns;
        cgm.eps_v = 1e-10;
        const auto r2 = sbl_variance_diag(gamma, inst.A, inst.T, data.weights, cgm);
        for (std::size_t k = 0; k < want.size(); ++k) {
            CHECK(r1.diag[k] == Catch::Approx(want[k]).epsilon(1e-6).margin(1e-10));
            CHECK(r2.diag[k] == Catch::Approx(want[k]).epsilon(1e-4).margin(1e-8));
            CHECK(r1.diag[k] >= -1e-10);
        }
    }
}

TEST_CASE("gaussian-model EM driver") {
    const auto inst = make_gauss_4x4();
    SECTION("zero iterations keep the initial state") {
        SblConfig cfg;
        cfg.n_em_iters = 0;
        const auto res = run_sbl(inst.A, inst.T, inst.sino, cfg);
        for (double g : res.gamma) CHECK(g == 100.0);
        for (double m : res.m) CHECK(m == 0.0);
    }
    SECTION("gamma stays positive and the image ends nonnegative") {
        SblConfig cfg;
        cfg.n_em_iters = 8;
        const auto res = run_sbl(inst.A, inst.T, inst.sino, cfg);
        for (double g : res.gamma) CHECK(g > 0.0);
        for (double m : res.m) CHECK(m >= 0.0);
        CHECK(res.cg_iters_mean.size() == 8);
    }
    SECTION("overcomplete transforms are rejected") {
        ImageGrid grid;
        grid.nx = grid.ny = 4;
        grid.pixel_size = 1.0;
        const auto To = build_overcomplete(grid);
        CHECK_THROWS_AS(run_sbl(inst.A, To, inst.sino, SblConfig{}), validation_error);
    }
}
