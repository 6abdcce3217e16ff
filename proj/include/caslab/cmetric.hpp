#pragma once

#include "caslab/grid.hpp"
#include "caslab/io.hpp"

#include <filesystem>
#include <string>

namespace caslab {

// g = lambda dz dw̄ on a chart z of c1, with w a chart of c2.
//   mu          Beltrami coefficient of w, so conj(mu) = d_z w̄ / d_zbar w̄
//   wbar_dzbar  b = d_zbar w̄
// In (z, z̄) components: g_zz = lambda b conj(mu), g_zz̄ = lambda b / 2, g_z̄z̄ = 0.
struct ComplexMetric {
    ComplexField lambda;
    ComplexField mu;
    ComplexField wbar_dzbar;
    DiffOptions diff{};
    std::string kind = "general";

    const GridDomain& domain() const { return lambda.domain(); }
    ComplexField mubar() const { return mu.conj(); }
    ComplexField g_zz() const;
    ComplexField g_zzbar() const;
};

ComplexMetric make_metric(ComplexField lambda, ComplexField mu, ComplexField wbar_dzbar, DiffOptions diff = {});
// Builds the metric from its (z, z̄) components, with b chosen by the caller.
ComplexMetric metric_from_components(const ComplexField& g_zz, const ComplexField& g_zzbar,
                                     const ComplexField& wbar_dzbar, DiffOptions diff = {});
// Flat torus or window metric lambda = const, mu = 0, b = 1.
ComplexMetric constant_metric(const GridDomain& d, cplx lambda);

struct PositivityCertificate {
    bool passed = false;
    double max_abs_mu = 0;
    double min_abs_lambda = 0;
    double min_abs_b = 0;
    int worst_j = -1, worst_k = -1;
    std::string reason;
};

PositivityCertificate check_positive(const ComplexMetric& g, double tol = 1e-12);
// Throws PositivityError with the certificate's reason on failure.
void require_positive(const ComplexMetric& g, double tol = 1e-12);

// Laplace-Beltrami operator (2/g_zz̄) d_zbar(d_z u - conj(mu) d_zbar u).
ComplexField laplacian(const ComplexMetric& g, const ComplexField& u);

// Laplacian for Dirichlet problems on windows: u is continued past the edge by
// odd reflection about its boundary values and only centered stencils are used.
// Boundary nodes of the result are zero. Same as laplacian() on a torus.
ComplexField laplacian_dirichlet(const ComplexMetric& g, const ComplexField& u);

// Levi-Civita data in the frame (d_zbar, d_w), d_w = nu (d_z - conj(mu) d_zbar):
//   nabla d_zbar = alpha d_zbar,  nabla d_w = beta d_w,  G = g(d_zbar, d_w).
struct FrameForms {
    ComplexField nu;       // d_w z
    ComplexField G;
    ComplexField alpha_z, alpha_zbar, alpha_w;
    ComplexField beta_z, beta_zbar, beta_w;
};

FrameForms frame_connection_forms(const ComplexMetric& g);

// K = d alpha(d_zbar, d_w) / G. Throws SingularMetricError where |G| < eps.
ComplexField gauss_curvature(const ComplexMetric& g, double eps = 1e-12);

// Pullback of -4/(f1 - f̄2)^2 df1 df̄2 for f1 holomorphic in z. Derivatives are
// taken numerically unless supplied.
struct BersMaps {
    ComplexField f1, f1_z;
    ComplexField f2bar, f2bar_z, f2bar_zbar;
};
ComplexMetric bers_metric(const BersMaps& maps, double tol = 1e-10);
ComplexMetric bers_metric(const ComplexField& f1, const ComplexField& f2bar, DiffOptions diff = {}, double tol = 1e-10);

// Q1 = phi dz^3 and Q̄2 = psibar dw̄^3.
struct CubicPair {
    ComplexField phi;
    ComplexField psibar;
};

struct HolomorphyDefect {
    double phi = 0;     // max |d_zbar phi|
    double psibar = 0;  // max |d_w psibar|
};
HolomorphyDefect holomorphy_defect(const ComplexMetric& g, const CubicPair& q);

// (1/4) g(Q1, Q̄2) = 2 phi psibar / lambda^3.
ComplexField pair_cubics(const ComplexMetric& g, const CubicPair& q);

// rho g. Throws BranchError if rho has no continuous logarithm on the domain.
ComplexMetric conformal_scale(const ComplexMetric& g, const ComplexField& rho);

json metric_descriptor(const ComplexMetric& g);
// Writes <stem>.lambda.casf, <stem>.mu.casf, <stem>.wbar_dzbar.casf and <stem>.json.
void save_metric(const ComplexMetric& g, const std::filesystem::path& dir, const std::string& stem);
ComplexMetric load_metric(const std::filesystem::path& descriptor);

} // namespace caslab
