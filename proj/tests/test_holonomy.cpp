#include "caslab/error.hpp"
#include "caslab/holonomy.hpp"

#include "doctest.h"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

using namespace caslab;

namespace {

const Mat3 J = Eigen::Vector3cd(1, 1, -1).asDiagonal();

Mat3 random_matrix(std::mt19937& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Mat3 M;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) M(r, c) = {n(rng), n(rng)};
    return M;
}

// Smooth, non-flat, periodic connection.
FrameConnection wavy_connection(int n) {
    auto d = GridDomain::torus(n, n, 1.0, 1.0);
    FrameConnection c = constant_connection(d, Mat3::Zero(), Mat3::Zero());
    const double tau = 2 * std::numbers::pi;
    for (std::size_t k = 0; k < 9; ++k) {
        double p = 0.3 * double(k);
        c.ax[k] = make_field(d, [&](cplx z) { return cplx(std::sin(tau * z.real() + p), 0.4 * std::cos(tau * z.imag())); });
        c.ay[k] = make_field(d, [&](cplx z) { return cplx(std::cos(tau * (z.real() + z.imag()) - p), 0.0); });
    }
    return c;
}

ComplexMetric hyperbolic_window(int n) {
    auto d = GridDomain::window(n, n, 1.0, 1.0, cplx(-0.5, 1.0));
    return make_metric(make_field(d, [](cplx z) { return 1.0 / (z.imag() * z.imag()); }),
                       ComplexField::constant(d, 0.0), ComplexField::constant(d, 1.0));
}

} // namespace

TEST_CASE("zero and abelian connections have trivial holonomy") {
    auto d = GridDomain::torus(8, 8, 1.0, 1.0);
    auto zero = constant_connection(d, Mat3::Zero(), Mat3::Zero());
    auto h = integrate_loop(zero, LoopPath::rectangle(0.1, 0.5, 0.3), 40);
    CHECK((h.M - Mat3::Identity()).norm() == 0.0);
    std::mt19937 rng(3);
    auto ab = constant_connection(d, random_matrix(rng), Mat3::Zero());
    auto h2 = integrate_loop(ab, LoopPath::rectangle(0.1, 0.5, 0.3), 200);
    CHECK((h2.M - Mat3::Identity()).norm() < 1e-9);
}

TEST_CASE("constant non-commuting connection matches the exponential product") {
    auto d = GridDomain::torus(8, 8, 1.0, 1.0);
    std::mt19937 rng(11);
    Mat3 X = random_matrix(rng, 0.7), Y = random_matrix(rng, 0.7);
    auto c = constant_connection(d, X, Y);
    auto loop = LoopPath::rectangle(cplx(0.2, 0.1), 0.6, 0.4);
    Mat3 oracle = Mat3::Identity();
    const int fine = 400;
    for (std::size_t s = 1; s < loop.vertices.size(); ++s) {
        cplx dir = loop.vertices[s] - loop.vertices[s - 1];
        Mat3 step = (-(dir.real() * X + dir.imag() * Y) / double(fine)).exp();
        for (int k = 0; k < fine; ++k) oracle = step * oracle;
    }
    auto h = integrate_loop(c, loop, 800);
    CHECK((h.M - oracle).norm() < 1e-8);
    CHECK(h.steps >= 800);
}

TEST_CASE("RK4 converges at fourth order in the step count") {
    auto c = wavy_connection(32);
    auto loop = LoopPath::circle(cplx(0.5, 0.5), 0.3, 8);
    Mat3 ref = integrate_loop(c, loop, 8192).M;
    double e1 = (integrate_loop(c, loop, 256).M - ref).norm();
    double e2 = (integrate_loop(c, loop, 512).M - ref).norm();
    double e3 = (integrate_loop(c, loop, 1024).M - ref).norm();
    MESSAGE(e1, " ", e2, " ", e3);
    CHECK(e1 / e2 > 12.0);
    CHECK(e2 / e3 > 12.0);
}

TEST_CASE("composition order and loop reversal") {
    auto c = wavy_connection(24);
    cplx base(0.3, 0.3);
    auto g1 = LoopPath::rectangle(base, 0.3, 0.2, 300);
    // circle through the base point
    LoopPath l2;
    for (int k = 0; k <= 16; ++k)
        l2.vertices.push_back(k % 16 == 0 ? base : base + 0.15 - 0.15 * std::polar(1.0, 2 * std::numbers::pi * k / 16));
    l2.subdivisions = 300;
    Mat3 M1 = integrate_loop(c, g1, 600).M, M2 = integrate_loop(c, l2, 600).M;
    Mat3 M12 = integrate_loop(c, g1.then(l2), 1200).M;
    CHECK((M12 - M2 * M1).norm() < 1e-9);
    CHECK((M12 - M1 * M2).norm() > 1e-3);
    Mat3 Mr = integrate_loop(c, g1.reversed(), 600).M;
    CHECK((Mr * M1 - Mat3::Identity()).norm() < 1e-9);
    CHECK_THROWS_AS(g1.then(LoopPath::rectangle(0.0, 0.1, 0.1)), DomainError);
}

TEST_CASE("small loops sample the curvature") {
    auto d = GridDomain::torus(8, 8, 1.0, 1.0);
    Mat3 X = Mat3::Zero(), Y = Mat3::Zero();
    X(0, 1) = 1.0;
    X(1, 2) = 0.5;
    Y(1, 0) = 1.0;
    Y(2, 1) = -0.3;
    auto c = constant_connection(d, X, Y);
    double F = flatness_residual(c).max_abs();
    for (double eps : {0.05, 0.01}) {
        auto h = integrate_loop(c, LoopPath::rectangle(cplx(0.4, 0.4), eps, eps), 200);
        double ratio = (h.M - Mat3::Identity()).norm() / (eps * eps * F);
        CHECK(std::abs(ratio - 1.0) < 3 * eps);
    }
}

TEST_CASE("Q = 0 hyperbolic window holonomy is unimodular and preserves the form") {
    auto h = hyperbolic_window(48);
    auto c = assemble_connection(h, {ComplexField::constant(h.domain(), 0.0), ComplexField::constant(h.domain(), 0.0)});
    auto hol = integrate_loop(c, LoopPath::circle(cplx(0.0, 1.5), 0.3, 32), 512);
    auto p = unimodular_project(hol);
    CHECK(p.det_defect < 1e-8);
    CHECK(preserves_form(p.M) < 1e-5);
    double res = flatness_residual(c, h.diff).max_abs();
    CHECK((p.M - Mat3::Identity()).norm() < 10 * std::abs(hol.loop.area()) * res + 1e-6);
    auto j = holonomy_to_json(p);
    CHECK(j["defects"]["form_2_1"].get<double>() < 1e-5);
    CHECK(j["integrator"]["steps"].get<int>() == hol.steps);
    CHECK(hol.steps >= 512);
    CHECK_THROWS_AS(integrate_loop(c, LoopPath::circle(cplx(0.0, 1.5), 0.8), 64), DomainError);
}

TEST_CASE("manufactured sphere holonomy is trivial to discretization accuracy") {
    std::vector<double> defects;
    for (int n : {24, 48}) {
        auto d = GridDomain::window(n, n, 1.0, 1.0, cplx(-0.5, 1.0));
        const cplx a(0.08, 0.05);
        auto m = manufactured_sphere(d, [&](cplx z) { return z + a * z * z; }, [&](cplx z) { return 1.0 + 2.0 * a * z; });
        auto c = assemble_connection(m.g, m.q);
        auto hol = unimodular_project(integrate_loop(c, LoopPath::rectangle(cplx(-0.2, 1.3), 0.4, 0.4), 256));
        CHECK(hol.det_defect < 1e-8);
        defects.push_back((hol.M - Mat3::Identity()).norm());
    }
    CHECK(defects[1] < 1e-4);
    CHECK(defects[0] / defects[1] > 4.0);
}

TEST_CASE("unimodular projection") {
    CHECK((unimodular_project(Mat3(2.0 * Mat3::Identity())) - Mat3::Identity()).norm() < 1e-15);
    CHECK((unimodular_project(Mat3(Mat3::Identity())) - Mat3::Identity()).norm() == 0.0);
    std::mt19937 rng(5);
    for (int i = 0; i < 20; ++i) {
        Mat3 P = unimodular_project(random_matrix(rng));
        CHECK(std::abs(P.determinant() - 1.0) < 1e-12);
    }
    const cplx w = std::polar(1.0, 2 * std::numbers::pi / 3);
    Mat3 M = Mat3::Identity();
    CHECK((unimodular_project(M, w) - Mat3(M / w)).norm() < 1e-15);
    CHECK_THROWS_AS(unimodular_project(Mat3(Mat3::Zero())), DomainError);
}

TEST_CASE("invariants and form preservation") {
    auto inv = invariants(Mat3::Identity());
    CHECK(std::abs(inv.trace - 3.0) < 1e-15);
    CHECK(preserves_form(Mat3::Identity(), J) == 0.0);
    CHECK(preserves_form(Mat3::Identity(), Mat3::Random()) == 0.0);
    std::mt19937 rng(8);
    Mat3 M = random_matrix(rng);
    for (int i = 0; i < 5; ++i) {
        Mat3 P = random_matrix(rng) + 3.0 * Mat3::Identity();
        auto a = invariants(M), b = invariants(P * M * P.inverse());
        CHECK(std::abs(a.trace - b.trace) < 1e-10);
        CHECK(std::abs(a.trace_inverse - b.trace_inverse) < 1e-10);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(a.eigenvalues[std::size_t(k)] - b.eigenvalues[std::size_t(k)]) < 1e-10);
    }
    // exp of a J-antisymmetric generator lies in SO(2,1)
    Mat3 S = random_matrix(rng);
    Mat3 Xg = S - J * S.transpose() * J;
    CHECK((Xg.transpose() * J + J * Xg).norm() < 1e-12);
    Mat3 E = Xg.exp();
    CHECK(preserves_form(E, J) < 1e-10);
    CHECK(preserves_form(M, J) > 1e-2);
}

TEST_CASE("batch integration and json round trip") {
    auto c = wavy_connection(16);
    std::vector<LoopPath> loops = {LoopPath::rectangle(0.1, 0.2, 0.2), LoopPath::circle(cplx(0.5, 0.5), 0.2),
                                   LoopPath::rectangle(cplx(0.3, 0.6), 0.1, 0.3)};
    auto serial = integrate_loops(c, loops, 64, 1);
    auto par = integrate_loops(c, loops, 64, 3);
    for (std::size_t i = 0; i < loops.size(); ++i) CHECK((serial[i].M - par[i].M).norm() == 0.0);
    CHECK((matrix_from_json(matrix_to_json(serial[1].M)) - serial[1].M).norm() == 0.0);
    auto l = loop_from_json(loop_to_json(loops[1]));
    CHECK(l.vertices == loops[1].vertices);
    CHECK(std::abs(LoopPath::rectangle(0.0, 2.0, 0.5).area() - 1.0) < 1e-15);
    CHECK(LoopPath::rectangle(0.0, 2.0, 0.5).reversed().area() < 0);
}
