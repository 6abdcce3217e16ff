#include "caslab/error.hpp"
#include "caslab/grid.hpp"

#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>

using namespace caslab;
using std::numbers::pi;

namespace {

const cplx I(0, 1);

double max_err(const ComplexField& a, const std::function<cplx(cplx)>& exact) {
    double e = 0;
    for (int k = 0; k < a.domain().ny; ++k)
        for (int j = 0; j < a.domain().nx; ++j) e = std::max(e, std::abs(a(j, k) - exact(a.domain().node(j, k))));
    return e;
}

} // namespace

TEST_CASE("spectral Wirtinger derivatives of a Fourier mode") {
    auto d = GridDomain::torus(32, 32, 1.0, 1.0);
    // f = exp(2 pi i (x + 2y)); d_z f = pi i (1 - 2i) f, d_zbar f = pi i (1 + 2i) f
    auto mode = [](cplx z) { return std::exp(2.0 * pi * I * (z.real() + 2.0 * z.imag())); };
    auto f = make_field(d, mode);
    CHECK(max_err(d_z(f), [&](cplx z) { return pi * I * (1.0 - 2.0 * I) * mode(z); }) < 1e-11);
    CHECK(max_err(d_zbar(f), [&](cplx z) { return pi * I * (1.0 + 2.0 * I) * mode(z); }) < 1e-11);
}

TEST_CASE("conjugation swaps the Wirtinger derivatives") {
    auto d = GridDomain::torus(16, 16, 2.0, 1.0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    auto f = make_field(d, [&](cplx) { return cplx(n(rng), n(rng)); });
    auto lhs = d_zbar(f.conj());
    auto rhs = d_z(f).conj();
    CHECK((lhs - rhs).max_abs() < 1e-10);
}

TEST_CASE("derivatives commute and satisfy Leibniz on smooth periodic data") {
    auto d = GridDomain::torus(64, 64, 1.0, 1.0);
    auto f = make_field(d, [](cplx z) { return std::exp(std::sin(2 * pi * z.real()) + cplx(0, 1) * std::cos(2 * pi * z.imag())); });
    auto g = make_field(d, [](cplx z) { return std::cos(2 * pi * (z.real() - z.imag())) + 2.0; });
    CHECK((d_z(d_zbar(f)) - d_zbar(d_z(f))).max_abs() < 1e-9);
    auto lhs = d_z(f * g);
    auto rhs = d_z(f) * g + f * d_z(g);
    CHECK((lhs - rhs).max_abs() < 1e-9);
}

TEST_CASE("finite differences reach fourth order on a window") {
    auto run = [](int n) {
        auto d = GridDomain::window(n, n, 1.0, 1.0, cplx(0.3, 1.0));
        auto f = make_field(d, [](cplx z) { return std::exp(cplx(0.5, 0.7) * z * z); });
        DiffOptions o{DiffBackend::FiniteDifference, 4};
        return max_err(d_z(f, o), [](cplx z) { return cplx(1.0, 1.4) * z * std::exp(cplx(0.5, 0.7) * z * z); }) +
               max_err(d_zbar(f, o), [](cplx) { return cplx(0); });
    };
    double e1 = run(33), e2 = run(65);
    CHECK(e2 < 1e-5);
    CHECK(std::log2(e1 / e2) > 3.6);
}

TEST_CASE("higher finite-difference order is accepted") {
    auto d = GridDomain::window(65, 65, 1.0, 1.0);
    auto f = make_field(d, [](cplx z) { return std::sin(z); });
    DiffOptions o{DiffBackend::FiniteDifference, 8};
    CHECK(max_err(d_z(f, o), [](cplx z) { return std::cos(z); }) < 1e-11);
}

TEST_CASE("spectral backend refuses a window") {
    auto d = GridDomain::window(16, 16, 1.0, 1.0);
    auto f = ComplexField::constant(d, 1.0);
    CHECK_THROWS_AS(d_z(f, {DiffBackend::Spectral, 4}), DomainError);
}

TEST_CASE("grid mismatch and non-finite samples are rejected") {
    auto a = ComplexField::constant(GridDomain::torus(8, 8, 1, 1), 1.0);
    auto b = ComplexField::constant(GridDomain::torus(16, 8, 1, 1), 1.0);
    CHECK_THROWS_AS(a + b, DomainError);
    auto d = GridDomain::torus(8, 8, 1, 1);
    try {
        make_field(d, [](cplx z) { return z.real() >= 0.5 ? cplx(NAN, 0) : cplx(1); });
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(e.j == 4);
        CHECK(e.k == 0);
    }
    CHECK_THROWS_AS(GridDomain::torus(2, 8, 1, 1), DomainError);
}

TEST_CASE("snapshot round trip is bit exact") {
    auto d = GridDomain::torus(8, 4, 1.5, 0.25);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e300, 1e300);
    auto f = make_field(d, [&](cplx) { return cplx(u(rng), u(rng)); });
    auto bytes = encode_snapshot(f);
    CHECK(bytes.size() == 32 + 16 * 32);
    CHECK(bytes[0] == 'C');
    auto g = decode_snapshot(bytes);
    CHECK(g.domain().nx == 8);
    CHECK(g.domain().ly == 0.25);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(std::memcmp(&f.values()[i], &g.values()[i], sizeof(cplx)) == 0);
    }
    auto path = std::filesystem::temp_directory_path() / "caslab_grid_roundtrip.casf";
    save_snapshot(f, path);
    auto h = load_snapshot(path);
    CHECK(encode_snapshot(h) == bytes);
    std::filesystem::remove(path);
    bytes[4] = 9;
    CHECK_THROWS_AS(decode_snapshot(bytes), DomainError);
}

TEST_CASE("continuous logarithm and its obstructions") {
    auto w = GridDomain::window(33, 33, 2.0, 2.0, cplx(-1, 1));
    auto f = make_field(w, [](cplx z) { return z * z; }); // zero-free on the upper window
    auto l = log_field(f);
    CHECK((l.exp() - f).max_abs() < 1e-12);
    auto g = make_field(w, [](cplx z) { return z - cplx(0.01, 2.013); });
    CHECK_THROWS_AS(log_field(g), BranchError);
    auto t = GridDomain::torus(32, 32, 1.0, 1.0);
    auto wind = make_field(t, [](cplx z) { return std::exp(2 * pi * I * z.real()); });
    CHECK_THROWS_AS(log_field(wind), BranchError);
    auto ok = make_field(t, [](cplx z) { return 2.0 + std::cos(2 * pi * z.real()) * I; });
    CHECK_NOTHROW(log_field(ok));
    auto r = sqrt_field(ok);
    CHECK((r * r - ok).max_abs() < 1e-12);
    CHECK(r[0].real() > 0);
}

TEST_CASE("Lagrange interpolation is accurate on smooth data") {
    auto d = GridDomain::window(41, 41, 1.0, 1.0);
    auto f = make_field(d, [](cplx z) { return std::exp(z) * std::cos(z.imag()); });
    cplx z(0.3141, 0.777);
    cplx exact = std::exp(z) * std::cos(z.imag());
    CHECK(std::abs(interpolate(f, z, 4) - exact) < 1e-7);
    CHECK(std::abs(interpolate(f, z, 8) - exact) < 1e-12);
    CHECK(std::abs(interpolate(f, cplx(0.001, 0.999), 6) - std::exp(cplx(0.001, 0.999)) * std::cos(0.999)) < 1e-9);
}

TEST_CASE("Fornberg weights reproduce the classical stencils") {
    std::vector<double> x{-2, -1, 0, 1, 2};
    auto w = fornberg_weights(0.0, x, 1);
    CHECK(w[0] == doctest::Approx(1.0 / 12));
    CHECK(w[1] == doctest::Approx(-8.0 / 12));
    CHECK(w[3] == doctest::Approx(8.0 / 12));
    auto w2 = fornberg_weights(0.0, x, 2);
    CHECK(w2[2] == doctest::Approx(-30.0 / 12));
}
