#pragma once

#include "caslab/cmetric.hpp"
#include "caslab/error.hpp"
#include "caslab/io.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace caslab {

// Sampled map sigma: window -> C^3 over real coordinates (x, y), with a transversal field.
struct ImmersionSample {
    std::string kind;
    json params = json::object();
    std::array<ComplexField, 3> sigma;
    std::array<ComplexField, 3> xi;
    // Declared complex coordinates (z, wbar) as functions of (x, y), when the example has them.
    std::optional<std::array<ComplexField, 2>> chart;
    // Closed-form derivatives; finite differences are used for whatever is missing.
    // sigma_jet: sigma_x, sigma_y, sigma_xx, sigma_xy, sigma_yy; xi_jet: xi_x, xi_y.
    std::optional<std::array<std::array<ComplexField, 3>, 5>> sigma_jet;
    std::optional<std::array<std::array<ComplexField, 3>, 2>> xi_jet;
    DiffOptions diff{};

    const GridDomain& domain() const { return sigma[0].domain(); }
};

// Default window for each kind; n is the node count per side (odd puts the origin on a node).
GridDomain default_window(const std::string& kind, int n = 49);

// c (e^{z + wbar}, e^{zeta^2 z + zeta wbar}, e^{zeta z + zeta^2 wbar}), zeta = e^{2 pi i / 3},
// with z = x + iy and w = z + kappa conj(z); xi = sigma.
ImmersionSample tzitzeica(const GridDomain& d, cplx c = 1.0, cplx kappa = 0.0);
// (x, y, (x^2 + e^{i theta} y^2) / 2), xi = (0, 0, e^{-i theta}).
ImmersionSample paraboloid(const GridDomain& d, double theta = 0.0);
// (x, y, F(x, y)), xi = (0, 0, 1).
ImmersionSample graph(const GridDomain& d, const std::function<cplx(double, double)>& F, json params = json::object());
// Hyperboloid model point of (f1, f2bar) in C^{2,1}; xi = sigma. f1 and f2bar are
// functions of z = x + iy and zbar respectively.
ImmersionSample bers_immersion(const GridDomain& d, const std::function<cplx(cplx)>& f1,
                               const std::function<cplx(cplx)>& f2bar, json params = json::object());
// Dispatch on kind in {tzitzeica, paraboloid, graph, bers} with JSON parameters.
ImmersionSample build(const std::string& kind, const json& params, int n = 49);

// Throws DomainError naming the first node where sigma_x, sigma_y are dependent.
void check_admissible(const ImmersionSample& s, double tol = 1e-10);

// Nodewise solution of
//   sigma_ab = Gamma^c_ab sigma_c + g_ab xi,   xi_a = -S^c_a sigma_c + tau_a xi
// in the basis (sigma_x, sigma_y, xi).
struct AffineData {
    std::array<ComplexField, 3> g;      // g_xx, g_xy, g_yy
    std::array<ComplexField, 6> gamma;  // Gamma^c_ab at index 2 * ab + c, ab in (xx, xy, yy)
    std::array<ComplexField, 4> S;      // S^c_a at index 2 * c + a
    std::array<ComplexField, 2> tau;
    ComplexField theta;                 // det(sigma_x, sigma_y, xi)
    ComplexField cond;                  // condition number of the basis, as a real field
    double max_cond = 0;
};

// Throws SingularMetricError when a basis condition number exceeds cond_cap.
AffineData extract_affine_data(const ImmersionSample& s, double cond_cap = 1e10);

// C_abc = g((nabla - nabla^g)_a b, c) at index 4a + 2b + c.
std::array<ComplexField, 8> pick_tensor(const AffineData& a, const DiffOptions& diff = {});
// Curvature of g_xx dx^2 + 2 g_xy dx dy + g_yy dy^2 (Brioschi).
ComplexField metric_curvature(const std::array<ComplexField, 3>& g, const DiffOptions& diff = {});
// g^{aa'} g^{bb'} g^{cc'} C_abc C_a'b'c'
ComplexField cubic_norm(const std::array<ComplexField, 3>& g, const std::array<ComplexField, 8>& C);
// sqrt(det g) continued from the first node.
ComplexField metric_volume(const std::array<ComplexField, 3>& g);

struct BlaschkeNormalization {
    ImmersionSample sample;
    ComplexField alpha;
    std::array<ComplexField, 2> eta;  // components along sigma_x, sigma_y
};

// xi -> alpha xi + eta with alpha^2 = dV_g / theta and g(eta, .) = -(alpha tau + d alpha).
// Throws BranchError when dV_g / theta has no continuous square root on the window.
BlaschkeNormalization blaschke_normalize(const ImmersionSample& s);

struct CheckResult {
    std::string name;
    double value = 0;
    double tol = 0;
    bool pass = false;
    bool informational = false;  // reported, excluded from the verdict
    std::string note;
};

struct ExampleReport {
    std::string name;
    std::string kind;
    json params;
    double max_cond = 0;
    std::vector<CheckResult> checks;
    bool pass() const;
};

struct CatalogueOptions {
    int n = 49;
    int threads = 1;
    int margin = 3;  // boundary rings excluded from residual norms
};

struct CatalogueReport {
    std::vector<ExampleReport> examples;
    bool pass() const;
};

CatalogueReport verify_catalogue(const CatalogueOptions& opt = {});
json catalogue_to_json(const CatalogueReport& r);
std::string catalogue_to_markdown(const CatalogueReport& r);

} // namespace caslab
