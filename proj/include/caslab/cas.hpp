#pragma once

#include "caslab/cmetric.hpp"
#include "caslab/io.hpp"

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <functional>

namespace caslab {

// Nonzero components of the difference tensor K = nabla - nabla^g:
//   K_{d_w} d_w = k_ww d_zbar,  K_{d_zbar} d_zbar = k_zbarzbar d_w,  K_{d_zbar} d_w = 0.
struct DifferenceTensor {
    ComplexField k_ww;
    ComplexField k_zbarzbar;
};

DifferenceTensor difference_tensor(const ComplexMetric& g, const CubicPair& q);

// K_g + 1 - 2 phi psibar / lambda^3.
ComplexField gauss_identity_residual(const ComplexMetric& g, const CubicPair& q);

using Mat3 = Eigen::Matrix3cd;

// Connection matrices along d_x and d_y: a section with components v in the frame
// is parallel along gamma iff v' = -(A_x x' + A_y y') v.
//
// Assembly frame: (e1, e2, xi) = (d_zbar, d_w, xi) rescaled by G^{-1/2} on the
// tangent part so that g(e1, e2) = 1 and the connection is trace free. The stored
// matrices are in the frame (e1, e2, xi) * basis, in which the form with
// <e1, e2> = 1, <xi, xi> = -1 reads diag(1, 1, -1).
struct FrameConnection {
    std::array<ComplexField, 9> ax, ay;  // row-major entries
    Mat3 basis;
    ComplexField G;                      // g(d_zbar, d_w)
    ComplexField sqrt_G;
    json metric;

    const GridDomain& domain() const { return G.domain(); }
    Mat3 Ax(std::size_t node) const;
    Mat3 Ay(std::size_t node) const;
    // Interpolated at an arbitrary chart point.
    Mat3 A(cplx z, cplx direction, int order = 4) const;
};

struct AssemblyOptions {
    double frame_tol = 1e-12;      // |G| below this is a degenerate frame
    double holomorphy_tol = 1e-4;  // relative to 1 + max |phi|, |psibar|
};

// Throws PositivityError, SingularMetricError (degenerate frame) or DomainError
// (cubic data not holomorphic at grid scale).
FrameConnection assemble_connection(const ComplexMetric& g, const CubicPair& q, const AssemblyOptions& opt = {});

// |d_x A_y - d_y A_x + [A_x, A_y]| (Frobenius) at every node, as a real field.
ComplexField flatness_residual(const FrameConnection& c, const DiffOptions& diff = {});

// Constant matrices (no derivative terms).
FrameConnection constant_connection(const GridDomain& d, const Mat3& ax, const Mat3& ay);

struct StructuralReport {
    double apolarity_norm = 0;  // max |tr K_X| over X in {d_x, d_y}
    double symmetry_norm = 0;   // max |g(K_X Y, Z) - g(K_Y X, Z)| + |g(K_X Y, Z) - g(Y, K_X Z)|
    double codazzi_phi = 0;     // max |d_zbar phi|
    double codazzi_psibar = 0;  // max |d_w psibar|
    double gauss_identity_norm = 0;
    double flatness_norm = 0;
    double trace_norm = 0;      // max |tr A|
    double volume_norm = 0;     // max |d log G - (alpha + beta)|
    // Tolerances the verdicts were taken against.
    double algebraic_tol = 1e-10;
    double grid_tol = 1e-6;
    bool algebraic_pass = false;
    bool gauss_pass = false;
    bool flat_pass = false;
};

StructuralReport structural_report(const ComplexMetric& g, const CubicPair& q, double grid_tol = 1e-6);
json structural_report_to_json(const StructuralReport& r);

// Exact sphere data from a holomorphic chart map F (Im F > 0 on the window):
//   h = Bers metric of (F, conj F) = |F'|^2 / (Im F)^2 |dz|^2,
//   Q = -2 F'^3 dz^3 paired with -2 dwbar^3 (wbar = conj F),  u = log(sqrt(2) Im F).
// Then G(u) = 0, and g = e^{2u} h = 2 |F'|^2 |dz|^2 is flat with Gauss identity exact.
struct ManufacturedSphere {
    ComplexMetric h;
    CubicPair q;
    ComplexField u;
    ComplexMetric g;
};
ManufacturedSphere manufactured_sphere(const GridDomain& d, const std::function<cplx(cplx)>& F,
                                       const std::function<cplx(cplx)>& dF, DiffOptions diff = {});

// Writes 18 entry snapshots <stem>.ax<ij>.casf / <stem>.ay<ij>.casf and <stem>.json.
void save_connection(const FrameConnection& c, const std::filesystem::path& dir, const std::string& stem);
FrameConnection load_connection(const std::filesystem::path& descriptor);

} // namespace caslab
