#include "caslab/beltrami.hpp"
#include "caslab/error.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

using namespace caslab;

namespace {

const double pi = std::numbers::pi;
const cplx I(0, 1);

// Bump b(r) = exp(-1/(1 - (r/R)^2)) and its radial derivative.
struct Bump {
    double R;
    double v(double r) const {
        double t = r / R;
        return t < 1 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
    }
    double dr(double r) const {
        double t = r / R;
        if (t >= 1) return 0.0;
        double s = 1.0 - t * t;
        return v(r) * (-2.0 * t / (s * s)) / R;
    }
};

// phi = b(|z|) e^z with its Wirtinger derivatives; d_z r = zbar/(2r), d_zbar r = z/(2r).
struct BumpExp {
    Bump b{1.8};
    cplx phi(cplx z) const { return b.v(std::abs(z)) * std::exp(z); }
    cplx dzbar(cplx z) const {
        double r = std::abs(z);
        return r == 0 ? cplx(0) : b.dr(r) * z / (2 * r) * std::exp(z);
    }
    cplx dz(cplx z) const {
        double r = std::abs(z);
        cplx radial = r == 0 ? cplx(0) : b.dr(r) * std::conj(z) / (2 * r);
        return (radial + b.v(r)) * std::exp(z);
    }
};

// log G(r) for the radial stretch f = z G(|z|), tabulated by the trapezoid rule.
struct RadialProfile {
    double k, r0, r1;
    int n = 200000;
    std::vector<double> logG;
    RadialProfile(double k, double r0, double r1) : k(k), r0(r0), r1(r1), logG(n + 1, 0.0) {
        double h = (r1 - r0) / n;
        auto g = [&](double s) {
            double ks = k * smooth_cutoff(s, r0, r1);
            return 2 * ks / ((1 - ks) * s);
        };
        for (int i = n - 1; i >= 0; --i) {
            double s = r0 + i * h;
            logG[i] = logG[i + 1] - 0.5 * h * (g(s) + g(s + h));
        }
    }
    double G(double r) const {
        if (r >= r1) return 1.0;
        if (r <= r0) return std::exp(logG[0]) * std::pow(r / r0, 2 * k / (1 - k));
        double x = (r - r0) / (r1 - r0) * n;
        int i = std::min(int(x), n - 1);
        double t = x - i;
        return std::exp((1 - t) * logG[i] + t * logG[i + 1]);
    }
};

} // namespace

TEST_CASE("zero coefficient gives the identity map exactly") {
    auto d = GridDomain::window(64, 64, 2.0, 2.0, cplx(-1, -1));
    auto q = solve_beltrami(ComplexField::constant(d, 0.0));
    auto z = make_field(d, [](cplx w) { return w; });
    CHECK((q.f - z).max_abs() == 0.0);
    CHECK(q.f_zbar.max_abs() == 0.0);
    CHECK((q.f_z - 1.0).max_abs() == 0.0);
    CHECK(q.iterations == 1);
}

TEST_CASE("Cauchy transform inverts d_zbar on smooth compactly supported data") {
    BumpExp s;
    double prev = 1;
    for (int n : {64, 128}) {
        auto d = GridDomain::window(n, n, 4.0, 4.0, cplx(-2, -2));
        auto h = make_field(d, [&](cplx z) { return s.dzbar(z); });
        double err = (cauchy_transform(h) - make_field(d, [&](cplx z) { return s.phi(z); })).max_abs();
        CAPTURE(n);
        CHECK(err < prev / 10);
        prev = err;
    }
    CHECK(prev < 1e-5);
}

TEST_CASE("Beurling transform maps d_zbar phi to d_z phi") {
    BumpExp s;
    auto d = GridDomain::window(128, 128, 4.0, 4.0, cplx(-2, -2));
    auto h = make_field(d, [&](cplx z) { return s.dzbar(z); });
    auto exact = make_field(d, [&](cplx z) { return s.dz(z); });
    CHECK((beurling_transform(h) - exact).max_abs() < 1e-4);
    CHECK((beurling_transform(h, 2) - exact).max_abs() < 1e-4);
}

TEST_CASE("Cauchy transform of the unit disk indicator") {
    // C(1_D) = zbar inside the disk and 1/z outside.
    auto d = GridDomain::window(129, 129, 3.0, 3.0, cplx(-1.5, -1.5));
    auto h = make_field(d, [](cplx z) { return std::abs(z) < 1 ? cplx(1) : cplx(0); });
    auto c = cauchy_transform(h);
    double worst = 0;
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j) {
            cplx z = d.node(j, k);
            double r = std::abs(z);
            if (std::abs(r - 1) < 0.1) continue;
            cplx exact = r < 1 ? std::conj(z) : 1.0 / z;
            worst = std::max(worst, std::abs(c(j, k) - exact));
        }
    CHECK(worst < 0.05);
}

TEST_CASE("periodic Beurling transform is an isometry") {
    auto d = GridDomain::torus(64, 48, 1.0, 0.75);
    for (unsigned seed : {1u, 2u, 3u}) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd;
        auto h = make_field(d, [&](cplx) { return cplx(nd(rng), nd(rng)); });
        double r = beurling_periodic(h).l2_norm() / h.l2_norm();
        CHECK(std::abs(r - 1) < 1e-12);
    }
}

TEST_CASE("periodic Beurling transform on a shifted-lattice mode") {
    auto d = GridDomain::torus(32, 32, 1.0, 1.0);
    double kx = 2 * pi * 3.5, ky = 2 * pi * -1.5;
    auto e = make_field(d, [&](cplx z) { return std::exp(I * (kx * z.real() + ky * z.imag())); });
    cplx k(kx, ky);
    CHECK((beurling_periodic(e) - (std::conj(k) / k) * e).max_abs() < 1e-12);
}

TEST_CASE("radial stretch matches the closed form") {
    double k = 0.5, r0 = 1.0, r1 = 2.2;
    auto d = GridDomain::window(128, 128, 5.0, 5.0, cplx(-2.5, -2.5));
    auto q = solve_beltrami(radial_stretch_coefficient(d, k, r0, r1));
    RadialProfile prof(k, r0, r1);
    auto exact = make_field(d, [&](cplx z) { return z * prof.G(std::abs(z)); });
    // Normalization fixes f only up to translation.
    cplx shift = (q.f - exact).mean();
    CHECK(std::abs(shift) < 1e-8);
    CHECK((q.f - exact - shift).max_abs() < 1e-6);
    CHECK(q.contraction <= k + 0.05);
}

TEST_CASE("Neumann contraction is bounded by sup |mu|") {
    auto d = GridDomain::window(64, 64, 4.0, 4.0, cplx(-2, -2));
    Bump b{1.5};
    for (double amp : {0.3, 0.6, 0.8}) {
        auto mu = make_field(d, [&](cplx z) { return amp * b.v(std::abs(z - 0.1)) * std::exp(1.0) * std::exp(I * 3.0 * z.real()); });
        CAPTURE(amp);
        auto q = solve_beltrami(mu);
        CHECK(q.contraction <= mu.max_abs() + 0.05);
        CHECK(q.increments.size() == std::size_t(q.iterations));
        // d_zbar f = mu d_z f holds by construction of the fixed point.
        CHECK((q.f_zbar - mu * q.f_z).max_abs() < 1e-10);
    }
}

TEST_CASE("coefficients near the unit sphere are rejected or fail to converge") {
    auto d = GridDomain::window(48, 48, 4.0, 4.0, cplx(-2, -2));
    BeltramiOptions opt;
    opt.max_iter = 60;
    CHECK_THROWS_AS(solve_beltrami(radial_stretch_coefficient(d, 0.999, 1.0, 1.5), opt), ConvergenceError);
    CHECK_THROWS_AS(solve_beltrami(radial_stretch_coefficient(d, 1.0, 1.0, 1.5)), PositivityError);
}

TEST_CASE("coefficient touching the window edge is rejected") {
    auto d = GridDomain::window(32, 32, 2.0, 2.0, cplx(-1, -1));
    CHECK_THROWS_AS(solve_beltrami(ComplexField::constant(d, 0.2)), DomainError);
    CHECK_THROWS_AS(solve_beltrami(radial_stretch_coefficient(d, 0.3, 0.5, 1.3)), DomainError);
}

TEST_CASE("inverse map composes to the identity") {
    auto d = GridDomain::window(96, 96, 4.0, 4.0, cplx(-2, -2));
    Bump b{1.2};
    auto mu = make_field(d, [&](cplx z) { return 0.4 * b.v(std::abs(z)) * std::exp(1.0) * std::exp(I * z.imag()); });
    auto f = solve_beltrami(mu);
    auto nu = inverse_coefficient(f, d);
    CHECK(nu.max_abs() == doctest::Approx(mu.max_abs()).epsilon(1e-3));
    auto g = solve_beltrami(nu);
    CHECK(composition_defect(f, g) < 1e-5);
    auto j = evaluate(f, cplx(0.31, -0.17));
    CHECK(std::abs(j.f_zbar - 0.4 * b.v(std::abs(cplx(0.31, -0.17))) * std::exp(1.0) * std::exp(-0.17 * I) * j.f_z) < 1e-6);
}
