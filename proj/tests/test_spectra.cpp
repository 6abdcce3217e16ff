#include "caslab/error.hpp"
#include "caslab/spectra.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace caslab;

namespace {

const double pi = std::numbers::pi;

VecC random_vec(Eigen::Index n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    VecC v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(nd(rng), nd(rng));
    return v;
}

double matrix_free_deviation(const OperatorMatrix& A, int trials) {
    double worst = 0;
    for (int t = 0; t < trials; ++t) {
        VecC v = random_vec(Eigen::Index(A.size()), unsigned(t + 1));
        VecC mf = A.dofs.restrict(apply_operator(A.h, A.potential, A.dofs.extend(v)));
        worst = std::max(worst, (A.apply(v) - mf).norm() / mf.norm());
    }
    return worst;
}

} // namespace

TEST_CASE("flat torus operator is Fourier diagonal") {
    auto d = GridDomain::torus(16, 16, 1, 1);
    auto A = discretize_shifted(constant_metric(d, 1.0), 2.0);
    CHECK(A.dense);
    CHECK(A.real_entries);
    auto r = spectrum(A, 5);
    CHECK(r.sigma_min == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.eigenvalues[0].real() == doctest::Approx(-2.0).epsilon(1e-12));
    for (int i = 1; i < 5; ++i) CHECK(std::abs(r.eigenvalues[std::size_t(i)] - (-2.0 - 4 * pi * pi)) < 1e-9);
    for (double res : r.residuals) CHECK(res < 1e-8);
}

TEST_CASE("matrix agrees with the matrix-free operator") {
    auto torus = GridDomain::torus(12, 10, 1.0, 0.8);
    auto g = make_metric(make_field(torus, [](cplx z) { return 1.5 + 0.3 * std::sin(2 * pi * z.real()); }),
                         make_field(torus, [](cplx z) { return 0.2 * std::exp(cplx(0, 2 * pi * z.imag() / 0.8)); }),
                         ComplexField::constant(torus, cplx(1, 0.2)));
    auto u = make_field(torus, [](cplx z) { return cplx(0.1, 0.05) * std::cos(2 * pi * z.real()); });
    auto s = ComplexField::constant(torus, cplx(0.3, -0.1));
    CHECK(matrix_free_deviation(discretize(g, u, s), 20) < 1e-12);

    auto bers = sample_family(MetricFamily::BersAnalytic, 3, 1, 20).metric;
    auto A = discretize_shifted(bers, 2.0);
    CHECK_FALSE(A.dense);
    CHECK(matrix_free_deviation(A, 20) < 1e-12);
}

TEST_CASE("constant fold data has the constants in its kernel") {
    auto d = GridDomain::torus(8, 8, 1, 1);
    auto h = constant_metric(d, 1.0);
    auto A = discretize(h, ComplexField::constant(d, 0.5 * std::log(2.0 / 3.0)),
                        ComplexField::constant(d, -4.0 / 27.0));
    VecC one = VecC::Ones(Eigen::Index(A.size()));
    CHECK(A.apply(one).norm() < 1e-11);
    auto r = spectrum(A, 2);
    CHECK(r.sigma_min < 1e-8);
    CHECK(std::abs(r.eigenvalues[0]) < 1e-10);
    CHECK(constant_alignment(r.eigenvectors[0]) > 0.999999);
}

TEST_CASE("flat window Dirichlet operator reproduces the first Dirichlet eigenvalue") {
    for (int n : {16, 24}) {
        auto d = GridDomain::window(n, n, 1.0, 1.0);
        auto h = constant_metric(d, 1.0);
        CHECK(sigma_min(discretize_shifted(h, 2.0)).value == doctest::Approx(2 * pi * pi + 2).epsilon(1e-6));
        CHECK(sigma_min(discretize_shifted(h, 0.5)).value == doctest::Approx(2 * pi * pi + 0.5).epsilon(1e-6));
    }
}

TEST_CASE("hyperbolic window operator stays invertible under refinement") {
    double prev = 0;
    for (int n : {24, 48}) {
        auto d = GridDomain::window(n, n, 1.0, 1.0, cplx(-0.5, 1.0));
        auto h = make_metric(make_field(d, [](cplx z) { return 1.0 / (z.imag() * z.imag()); }),
                             ComplexField::constant(d, 0.0), ComplexField::constant(d, 1.0));
        double s = sigma_min(discretize_shifted(h, 2.0)).value;
        CHECK(s > 2.0);
        if (prev > 0) CHECK(std::abs(s - prev) < 0.05 * s);
        prev = s;
    }
}

TEST_CASE("iterative eigenpairs have small residuals and bracket sigma_min") {
    auto bers = sample_family(MetricFamily::BersAnalytic, 5, 2, 32).metric;
    auto A = discretize_shifted(bers, 2.0);
    REQUIRE(A.size() > SpectrumOptions{}.direct_limit);
    auto r = spectrum(A, 3);
    CHECK(r.converged);
    for (double res : r.residuals) CHECK(res < 1e-8);
    double lam = std::abs(r.eigenvalues[0]);
    CHECK(r.sigma_min <= lam * (1 + 1e-10));
    CHECK(lam <= r.condition_estimate * r.sigma_min);
    CHECK((A.apply(r.sigma_vector)).norm() == doctest::Approx(r.sigma_min).epsilon(1e-6));
    for (std::size_t i = 1; i < r.eigenvalues.size(); ++i)
        CHECK(std::abs(r.eigenvalues[i]) >= std::abs(r.eigenvalues[i - 1]));
}

TEST_CASE("factorization solves and adjoint solves") {
    auto A = discretize_shifted(sample_family(MetricFamily::Riemannian, 2, 0, 16).metric, 2.0);
    Factorization F(A);
    VecC b = random_vec(Eigen::Index(A.size()), 9);
    CHECK((A.apply(F.solve(b)) - b).norm() < 1e-10 * b.norm());
    CHECK((A.apply_adjoint(F.solve_adjoint(b)) - b).norm() < 1e-10 * b.norm());
}

TEST_CASE("Riemannian scan passes and is reproducible") {
    ScanOptions opt;
    opt.samples = 4;
    opt.n = 24;
    auto r1 = invertibility_scan(opt);
    auto r2 = invertibility_scan(opt);
    CHECK(r1.passed == 4);
    CHECK(r1.pass_fraction == 1.0);
    CHECK(scan_csv(r1) == scan_csv(r2));
    for (auto& row : r1.rows) {
        CHECK(row.sigma_min > opt.floor);
        CHECK_FALSE(row.numerical_kernel);
        CHECK(row.verdict == "invertible at grid scale");
    }
    auto csv = scan_csv(r1);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.rfind("index,params_hash,sigma_min", 0) == 0);
}

TEST_CASE("degenerate family is reported without crashing") {
    ScanOptions opt;
    opt.family = MetricFamily::Degenerate;
    opt.samples = 8;
    opt.n = 16;
    auto r = invertibility_scan(opt);
    CHECK(r.rows.size() == 8);
    CHECK(r.skipped > 0);
    for (auto& row : r.rows)
        if (row.verdict.rfind("skipped", 0) == 0) CHECK(row.verdict.find("mu") != std::string::npos);
    CHECK(family_from_name("degenerate") == MetricFamily::Degenerate);
    CHECK_THROWS_AS(family_from_name("nope"), DomainError);
}

TEST_CASE("dense operators refuse oversize grids") {
    auto d = GridDomain::torus(72, 72, 1, 1);
    CHECK_THROWS_AS(laplacian_matrix(constant_metric(d, 1.0)), DomainError);
}
