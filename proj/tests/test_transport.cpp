#include "caslab/transport.hpp"

#include "doctest.h"

#include <cmath>

using namespace caslab;

namespace {

using PS = PowerSeries2D;

double binom(int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// 1/(1 - zbar) truncated at order N
PS geometric_zbar(int N) {
    PS f(N);
    for (int k = 0; k <= N; ++k) f.at(0, k) = 1.0;
    return f;
}

double coeff_error(const PS& a, const PS& b) { return (a - b).ball_norm(1.0); }

// lambda = 1 / y^2 about z0 = i, in the local variables
PS hyperbolic_lambda(int N) {
    cplx half_over_i = 1.0 / cplx(0, 2);
    PS y = PS::constant(N, 1.0, cplx(0, 1)) + (PS::z(N, cplx(0, 1)) - PS::zbar(N, cplx(0, 1))) * half_over_i;
    return pow(y, -2);
}

} // namespace

TEST_CASE("series arithmetic") {
    const int N = 6;
    auto z = PS::z(N), zb = PS::zbar(N);
    CHECK(coeff_error(d_zbar(zb * zb), 2.0 * zb) == 0.0);
    CHECK(coeff_error(z * zb, PS::monomial(N, 1, 1)) == 0.0);
    auto cube = pow(zb + 1.0, 3);
    for (int k = 0; k <= 3; ++k) CHECK(cube(0, k) == binom(3, k));
    CHECK(cube(0, 4) == 0.0);
    auto f = PS::constant(N, 2.0) + z * cplx(0.3, 0.1) - zb * zb * 0.5 + z * zb;
    auto one = f * inverse(f);
    CHECK(std::abs(one(0, 0) - 1.0) < 1e-15);
    CHECK((one - PS::constant(N, 1.0)).ball_norm(1.0) < 1e-13);
    CHECK_THROWS_AS(inverse(z), DomainError);
    CHECK_THROWS_AS(PS(4) + PS(5), DomainError);
    // degree 7 falls outside order 6
    CHECK((pow(z, 4) * pow(zb, 3)).ball_norm(1.0) == 0.0);
    CHECK(std::abs(f.eval(0.1, 0.2) - (2.0 + cplx(0.3, 0.1) * 0.1 - 0.02 + 0.02)) < 1e-15);
    auto back = series_from_json(series_to_json(f));
    CHECK(coeff_error(back, f) == 0.0);
}

TEST_CASE("closed-form flows") {
    const int N = 8;
    auto zb = PS::zbar(N), z = PS::z(N);
    SUBCASE("g = 0 leaves f fixed") {
        auto f0 = zb * zb + z;
        auto st = solve_transport(f0, {{PS(N)}}, {0.7, 0.1});
        CHECK(coeff_error(st.f, f0) == 0.0);
    }
    SUBCASE("g = 1 translates zbar") {
        auto st = solve_transport(zb * zb, {{PS::constant(N, 1.0)}}, {0.5, 0.05});
        CHECK(coeff_error(st.f, pow(zb + 0.5, 2)) < 1e-14);
    }
    SUBCASE("g = z shears") {
        auto st = solve_transport(zb * zb, {{z}}, {0.5, 0.05});
        CHECK(std::abs(st.f(1, 1) - 1.0) < 1e-10);
        CHECK(coeff_error(st.f, pow(zb + 0.5 * z, 2)) < 1e-14);
        CHECK(st.history.size() == 11);
    }
}

TEST_CASE("Richardson ratio of RK4 on closed-form flows") {
    const int N = 12;
    auto zb = PS::zbar(N), z = PS::z(N);
    auto f0 = geometric_zbar(N);
    const double T = 0.5;
    // exact: f0(zbar + T) and f0(zbar + T z)
    PS exact1(N), exact2 = compose(f0, z, zb + T * z);
    for (int n = 0; n <= N; ++n)
        for (int k = 0; k <= n; ++k) exact1.at(0, k) += binom(n, k) * std::pow(T, n - k);
    std::vector<double> e1, e2;
    for (double dt : {0.05, 0.025, 0.0125}) {
        e1.push_back(coeff_error(solve_transport(f0, {{PS::constant(N, 1.0)}}, {T, dt}).f, exact1));
        e2.push_back(coeff_error(solve_transport(f0, {{z}}, {T, dt}).f, exact2));
    }
    MESSAGE("ratios ", (e1[0] / e1[1]), " ", (e1[1] / e1[2]), " ", (e2[0] / e2[1]), " ", (e2[1] / e2[2]));
    for (const auto& e : {e1, e2}) {
        CHECK(e[0] / e[1] == doctest::Approx(16.0).epsilon(0.15));
        CHECK(e[1] / e[2] == doctest::Approx(16.0).epsilon(0.15));
    }
}

TEST_CASE("series curvature and Laplacian") {
    const int N = 10;
    auto lam = hyperbolic_lambda(N);
    auto one = PS::constant(N, 1.0, cplx(0, 1));
    auto zero = PS(N, cplx(0, 1));
    auto h = MetricSeries::from_triple(lam, zero, one);
    auto K = gauss_curvature(h);
    CHECK((K + 1.0).ball_norm(0.5, N - 2) < 1e-12);
    auto flat = MetricSeries::from_triple(PS::constant(N, 2.0), PS(N), PS::constant(N, 1.0));
    CHECK(gauss_curvature(flat).ball_norm(1.0) == 0.0);
    // Delta(z zbar) = 4 / lambda for lambda |dz|^2
    auto lap = laplacian(flat, PS::z(N) * PS::zbar(N));
    CHECK((lap - PS::constant(N, 2.0)).ball_norm(1.0, N - 2) < 1e-14);
    // a sheared (mu != 0) constant metric is still flat
    auto sheared = MetricSeries::from_triple(PS::constant(N, 1.5), PS::constant(N, 0.3), PS::constant(N, cplx(1, 0.2)));
    CHECK(gauss_curvature(sheared).ball_norm(1.0) < 1e-14);
}

TEST_CASE("metric transport and commutation") {
    const int N = 8;
    auto z = PS::z(N), zb = PS::zbar(N);
    auto lam = PS::constant(N, 1.0) + 0.3 * (z * zb) + 0.1 * (z * z) - 0.05 * (zb * zb * zb);
    auto g0 = MetricSeries::from_triple(lam, 0.1 * z, PS::constant(N, 1.0));
    auto f0 = z * z * zb + zb + 0.2 * (z * zb * zb);
    SUBCASE("Z = 0") {
        auto gt = transport_metric(g0, {{PS(N)}}, {0.3, 0.05});
        CHECK(coeff_error(gt.h_zz, g0.h_zz) == 0.0);
        CHECK(coeff_error(gt.h_zzbar, g0.h_zzbar) == 0.0);
        auto d = commute_check(g0, f0, {{PS(N)}}, {0.3, 0.05});
        CHECK(d.curvature == 0.0);
        CHECK(d.laplacian == 0.0);
    }
    SUBCASE("constant metric under Z = c d_zbar stays flat") {
        auto flat = MetricSeries::from_triple(PS::constant(N, 2.0), PS(N), PS::constant(N, 1.0));
        auto gt = transport_metric(flat, {{PS::constant(N, cplx(0.4, -0.2))}}, {0.5, 0.05});
        CHECK(gauss_curvature(gt).ball_norm(1.0, N - 2) < 1e-13);
    }
    SUBCASE("analytic metric under Z = z d_zbar") {
        TransportOptions opt{0.1, 0.1 / 32};
        opt.norm_radius = 0.5;
        auto d = commute_check(g0, f0, {{z}}, opt);
        MESSAGE("curvature ", d.curvature, " laplacian ", d.laplacian, " product ", d.product);
        CHECK(d.curvature < 1e-7);
        CHECK(d.laplacian < 1e-7);
        CHECK(d.product < 1e-7);
        CHECK(d.compared_degree == N - 2);
    }
    SUBCASE("time-dependent generator") {
        Generator Z{{0.2 * z, z}};
        TransportOptions opt{0.1, 0.1 / 32};
        opt.norm_radius = 0.5;
        auto d = commute_check(g0, f0, Z, opt);
        CHECK(d.curvature < 1e-7);
        CHECK(d.laplacian < 1e-7);
    }
}

TEST_CASE("commutation defects decrease with truncation order for z-bar dependent fields") {
    std::vector<double> defects;
    for (int N : {6, 10, 14}) {
        auto z = PS::z(N), zb = PS::zbar(N);
        auto lam = PS::constant(N, 1.0) + 0.3 * (z * zb);
        auto g0 = MetricSeries::from_triple(lam, PS(N), PS::constant(N, 1.0));
        TransportOptions opt{0.05, 0.05 / 16};
        opt.norm_radius = 0.3;
        auto d = commute_check(g0, z * zb, {{PS::constant(N, 1.0) + 0.5 * zb}}, opt);
        defects.push_back(d.curvature + d.laplacian);
    }
    MESSAGE(defects[0], " ", defects[1], " ", defects[2]);
    CHECK(defects[1] <= defects[0] * 1.0000001);
    CHECK(defects[2] <= defects[1] * 1.0000001);
}

TEST_CASE("breakdown and stability diagnostics") {
    const int N = 12;
    auto zb = PS::zbar(N);
    CHECK_THROWS_AS(solve_transport(zb, {{zb * zb}}, {10.0, 1.0}), TransportBreakdownError);
    CHECK_THROWS_AS(solve_transport(zb, {{zb}}, {1.0, 0.5}), DomainError);
    CHECK_NOTHROW(solve_transport(zb, {{zb}}, {0.2, 0.05}));
    CHECK_THROWS_AS(solve_transport(zb, {{PS::zbar(N - 1)}}, {0.2, 0.05}), DomainError);
    CHECK_THROWS_AS(solve_transport(zb, {{zb}}, {0.2, -1.0}), DomainError);
}
