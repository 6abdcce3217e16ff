#include "caslab/examples.hpp"
#include "caslab/holonomy.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>

using namespace caslab;

namespace {

double max_dev(const ComplexField& f, cplx target) { return (f - target).max_abs(); }

double interior_dev(const ComplexField& f, cplx target, int m = 3) {
    const auto& d = f.domain();
    double e = 0;
    for (int k = m; k < d.ny - m; ++k)
        for (int j = m; j < d.nx - m; ++j) e = std::max(e, std::abs(f(j, k) - target));
    return e;
}

const ExampleReport& find(const CatalogueReport& r, const std::string& name) {
    for (const auto& e : r.examples)
        if (e.name == name) return e;
    throw std::runtime_error("missing example " + name);
}

const CheckResult& check(const ExampleReport& e, const std::string& name) {
    for (const auto& c : e.checks)
        if (c.name == name) return c;
    throw std::runtime_error("missing check " + name);
}

} // namespace

TEST_CASE("builders") {
    auto t = build("tzitzeica", json::object(), 49);
    const auto& d = t.domain();
    for (const auto& f : t.sigma) CHECK(std::abs(f(24, 24) - 1.0) < 1e-14);
    auto prod = t.sigma[0] * t.sigma[1] * t.sigma[2];
    CHECK(max_dev(prod, 1.0) < 1e-12);
    // c = 2: product is c^3 = 8
    auto t2 = tzitzeica(d, 2.0);
    CHECK(max_dev(t2.sigma[0] * t2.sigma[1] * t2.sigma[2], 8.0) < 1e-11);

    auto b = build("bers", json::object(), 33);
    auto q = b.sigma[0] * b.sigma[0] + b.sigma[1] * b.sigma[1] - b.sigma[2] * b.sigma[2];
    CHECK(max_dev(q, -1.0) < 1e-12);
    // real pair: point of the real hyperboloid, x/y in the first slot
    cplx p = b.domain().node(3, 7);
    CHECK(std::abs(b.sigma[0](3, 7) - p.real() / p.imag()) < 1e-13);

    auto par = build("paraboloid", json::object(), 21);
    double im = 0;
    for (std::size_t i = 0; i < par.sigma[2].size(); ++i) im = std::max(im, std::abs(par.sigma[2][i].imag()));
    CHECK(im == 0.0);

    CHECK_THROWS_AS(build("torus", json::object()), DomainError);
    CHECK_THROWS_AS(tzitzeica(d, 0.0), DomainError);
    // f1 = f2bar on the real axis
    json bad = {{"f1", {0.0, 1.0}}, {"f2bar", {0.0, 1.0}}, {"window", domain_to_json(GridDomain::window(9, 9, 1, 1, {-0.5, -0.5}))}};
    CHECK_THROWS_AS(build("bers", bad), DomainError);
}

TEST_CASE("admissibility failure is located") {
    auto d = GridDomain::window(11, 11, 1.0, 1.0, {-0.5, -0.5});
    // sigma_y = x sigma_x direction collapses along x = 0
    auto s = graph(d, [](double x, double y) { return cplx(x * y); });
    s.sigma[1] = s.sigma[0].map([](cplx v) { return v * v; });  // (x, x^2, xy): rank drops on x = 0
    try {
        check_admissible(s);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("node (5,") != std::string::npos);
    }
}

TEST_CASE("extraction on a graph") {
    auto d = GridDomain::window(41, 41, 1.0, 1.0, {-0.5, -0.5});
    auto s = graph(d, [](double x, double y) { return cplx(std::exp(0.3 * x) * std::cos(y), 0.2 * x * y); });
    auto a = extract_affine_data(s);
    for (const auto& f : a.S) CHECK(f.max_abs() < 1e-12);
    CHECK(a.tau[0].max_abs() < 1e-12);
    CHECK(a.tau[1].max_abs() < 1e-12);
    auto hxx = make_field(d, [](cplx p) { return cplx(0.09 * std::exp(0.3 * p.real()) * std::cos(p.imag()), 0.0); });
    auto hxy = make_field(d, [](cplx p) { return cplx(-0.3 * std::exp(0.3 * p.real()) * std::sin(p.imag()), 0.2); });
    CHECK((a.g[0] - hxx).max_abs() < 1e-7);
    CHECK((a.g[1] - hxy).max_abs() < 1e-7);
    CHECK(max_dev(a.theta, 1.0) < 1e-12);
}

TEST_CASE("tzitzeica data") {
    auto s = tzitzeica(default_window("tzitzeica"), 1.0);
    auto a = extract_affine_data(s);
    // z = x + iy, wbar = x - iy: g(d_z, d_wbar) = (g_xx + g_yy) / 4 = 1, g(d_z, d_z) = 0
    CHECK(max_dev(0.25 * (a.g[0] + a.g[2]), 1.0) < 1e-10);
    CHECK(max_dev(0.25 * (a.g[0] - a.g[2]) - 0.5 * cplx(0, 1) * a.g[1], 0.0) < 1e-10);
    // theta = det(sigma_z, sigma_wbar, sigma) dz dwbar = 3 sqrt(3) i c^3 (-2i) dx dy
    CHECK(max_dev(a.theta, 6.0 * std::sqrt(3.0)) < 1e-9);
    auto K = metric_curvature(a.g);
    CHECK(K.max_abs() < 1e-8);
    auto C2 = cubic_norm(a.g, pick_tensor(a));
    // |dz^3 + dwbar^3|^2 with g^{z wbar} = 1
    CHECK(max_dev(C2, 2.0) < 1e-6);
}

TEST_CASE("curvature of known metrics") {
    auto d = GridDomain::window(41, 41, 1.0, 1.0, {-0.5, 1.0});
    auto inv_y2 = make_field(d, [](cplx p) { return cplx(1.0 / (p.imag() * p.imag())); });
    auto zero = ComplexField::constant(d, 0.0);
    CHECK(interior_dev(metric_curvature({inv_y2, zero, inv_y2}), -1.0) < 1e-5);
    // round sphere chart: 4 / (1 + r^2)^2 |dz|^2
    auto sph = make_field(d, [](cplx p) { return 4.0 / std::pow(1.0 + std::norm(p), 2); });
    CHECK(interior_dev(metric_curvature({sph, zero, sph}), 1.0) < 1e-6);
}

TEST_CASE("Blaschke normalization") {
    auto d = GridDomain::window(33, 33, 1.0, 1.0, {-0.5, -0.5});
    auto base = paraboloid(d, 0.0);
    SUBCASE("already normalized") {
        auto bn = blaschke_normalize(base);
        CHECK(max_dev(bn.alpha, 1.0) < 1e-12);
        CHECK(bn.eta[0].max_abs() < 1e-12);
    }
    SUBCASE("constant scaling by 4") {
        auto s = base;
        for (auto& f : s.xi) f *= 4.0;
        s.xi_jet.reset();
        auto bn = blaschke_normalize(s);
        CHECK(max_dev(bn.alpha, 0.25) < 1e-12);
        CHECK(std::max(bn.eta[0].max_abs(), bn.eta[1].max_abs()) < 1e-12);
        CHECK(max_dev(bn.sample.xi[2], 1.0) < 1e-12);
    }
    SUBCASE("tangent shift") {
        auto s = base;
        s.sigma_jet.reset();
        s.xi_jet.reset();
        auto V0 = make_field(d, [](cplx p) { return cplx(0.2 * p.imag(), 0.1); });
        auto V1 = make_field(d, [](cplx p) { return cplx(0.3 * p.real() * p.real(), 0.0); });
        // sigma_x = (1, 0, x), sigma_y = (0, 1, y)
        auto X = make_field(d, [](cplx p) { return cplx(p.real()); });
        auto Y = make_field(d, [](cplx p) { return cplx(p.imag()); });
        s.xi = {V0, V1, 1.0 + V0 * X + V1 * Y};
        auto a = extract_affine_data(s);
        // tau(X) = g(X, V) with g = identity here
        CHECK((a.tau[0] - V0).max_abs() < 1e-8);
        auto bn = blaschke_normalize(s);
        CHECK((bn.eta[0] + V0).max_abs() < 1e-7);
        CHECK((bn.eta[1] + V1).max_abs() < 1e-7);
        auto b = extract_affine_data(bn.sample);
        CHECK(std::max(b.tau[0].max_abs(), b.tau[1].max_abs()) < 1e-7);
        CHECK(max_dev(bn.sample.xi[2], 1.0) < 1e-7);
    }
    SUBCASE("rotated paraboloid") {
        double th = 1.0;
        auto bn = blaschke_normalize(paraboloid(d, th));
        cplx w = std::polar(1.0, th / 4);
        CHECK(std::min(max_dev(bn.sample.xi[2], w), max_dev(bn.sample.xi[2], -w)) < 1e-12);
    }
}

TEST_CASE("Bers extraction feeds a flat connection") {
    auto s = build("bers", json::object(), 41);
    auto a = extract_affine_data(s);
    const auto& d = s.domain();
    ComplexField gzz = 0.25 * (a.g[0] - a.g[2] - 2.0 * cplx(0, 1) * a.g[1]), gzzb = 0.25 * (a.g[0] + a.g[2]);
    auto g = metric_from_components(gzz, gzzb, ComplexField::constant(d, 1.0));
    auto zero = ComplexField::constant(d, 0.0);
    auto c = assemble_connection(g, {zero, zero});
    auto h = integrate_loop(c, LoopPath::circle(cplx(0.0, 1.5), 0.1, 32, 512));
    double off = (h.M - Mat3::Identity()).norm();
    MESSAGE("holonomy defect ", off);
    CHECK(off < 1e-6);
}

TEST_CASE("catalogue verification") {
    CatalogueOptions opt;
    opt.threads = 2;
    auto r = verify_catalogue(opt);
    for (const auto& e : r.examples)
        for (const auto& c : e.checks)
            MESSAGE((e.name + " | " + c.name + " | " + std::to_string(c.value) + (c.informational ? " info" : "") +
                     (c.pass ? "" : " FAIL")));
    CHECK(r.pass());
    const auto& t = find(r, "tzitzeica");
    CHECK(check(t, "g(d_z, d_wbar) = 1").value < 1e-8);
    CHECK(check(t, "image on z1 z2 z3 = c^3").value < 1e-10);
    // the alternative normalization disagrees by 3/4
    CHECK(check(t, "K_g = -1 + g(Q1, Q2bar) / 4 with Q1 + Q2bar = C").value == doctest::Approx(0.75).epsilon(1e-4));
    CHECK(check(find(r, "tzitzeica-blaschke"), "volume theta^2 = det g").pass);
    CHECK_FALSE(check(find(r, "paraboloid-rotated"), "volume theta^2 = det g").pass);
    auto j = catalogue_to_json(r);
    CHECK(j["examples"].size() == 7);
    auto md = catalogue_to_markdown(r);
    CHECK(md.find("| check | value | tol | status |") != std::string::npos);
    opt.threads = 1;
    CHECK(catalogue_to_json(verify_catalogue(opt)).dump() == j.dump());
}
