#pragma once

#include "caslab/cmetric.hpp"
#include "caslab/error.hpp"
#include "caslab/spectra.hpp"

#include <optional>
#include <vector>

namespace caslab {

// G(u) = Delta_h u - e^{2u} + s e^{-4u} + 1 with s = pair_cubics(h, q).
// On windows the Laplacian is laplacian_dirichlet and G vanishes on the boundary ring.
ComplexField gauss_residual(const ComplexMetric& h, const CubicPair& q, const ComplexField& u);
ComplexField gauss_residual(const ComplexMetric& h, const ComplexField& s, const ComplexField& u);

// L(v) = Delta_h v - 2 e^{2u} v - 4 s e^{-4u} v, zero on the boundary ring of a window.
ComplexField linearize(const ComplexMetric& h, const CubicPair& q, const ComplexField& u, const ComplexField& v);
OperatorMatrix linearize(const ComplexMetric& h, const CubicPair& q, const ComplexField& u);

struct GaussOptions {
    double tol = 1e-12;            // max |G| over the free nodes
    int max_iter = 40;
    double singular_floor = 1e-13; // reciprocal condition below which the linearization counts as singular
    std::size_t dense_limit = 1024;
    int gmres_restart = 50;
    int gmres_max_iter = 2000;
    double gmres_tol = 1e-10;
    bool spectral_summary = true;
    // Dirichlet data on windows; the boundary values of u0 when absent.
    std::optional<ComplexField> boundary;
};

struct SpectralSummary {
    bool computed = false;
    cplx smallest_eigenvalue{NAN, NAN};
    double eigen_residual = NAN;
    double sigma_min = NAN;
    double constant_alignment = NAN;
};

struct GaussSolution {
    ComplexMetric h;
    CubicPair cubics;
    ComplexField s;
    ComplexField u;
    double residual_norm = 0;
    std::vector<double> newton_trace;  // max |G| at each iterate, starting with u0
    std::vector<double> imag_trace;    // max |Im u| at each iterate
    int iterations = 0;
    std::string linear_solver;
    SpectralSummary spectral;
};

// Throws SingularOperatorError when the linearization is singular at grid scale,
// ConvergenceError on divergence or when max_iter is exhausted.
GaussSolution newton_solve(const ComplexMetric& h, const CubicPair& q, const ComplexField& u0,
                           const GaussOptions& opt = {});

// Largest r_{k+1} / r_k^2 over the last `pairs` steps of the trace whose r_{k+1}
// lies above `floor`. NaN if fewer such steps exist.
double quadratic_constant(const std::vector<double>& trace, int pairs = 3, double floor = 1e-13);

SpectralSummary spectral_summary(const OperatorMatrix& A);

enum class RayMode { Twistor, HLL };
const char* ray_mode_name(RayMode m);
RayMode ray_mode_from_name(const std::string& s);

// (zeta phi, psibar / zeta)
CubicPair twistor_pair(const CubicPair& q, cplx zeta);
// (t phi, -t conj(phi)); psibar of q is ignored.
CubicPair hll_pair(const CubicPair& q, double t);

struct RaySchedule {
    RayMode mode = RayMode::HLL;
    // Strictly monotone parameters; solutions are reported on every branch at each.
    // Twistor: zeta = exp(t * direction). HLL: the pair is hll_pair(q, t).
    std::vector<double> params;
    cplx direction{0, 1};
    double step = 0.02;
    double min_step = 1e-7;
    double max_step = 0.05;
    int max_steps = 2000;
    GaussOptions newton{};

    void validate() const;
    CubicPair pair_at(const CubicPair& q, double t) const;
};

struct RayPoint {
    double t = 0;
    int branch = 0;
    ComplexField u;
    cplx s_mean, e2u_mean, u_mean;
    cplx eigenvalue;       // eigenvalue of the linearization nearest 0
    double tangent_t = 0;  // t-component of the unit tangent
    double residual = 0;
};

struct FoldReport {
    bool detected = false;
    bool turning_point = false;
    bool eigen_crossing = false;
    bool refined = false;
    // Parameters of the path points on either side of the fold along the arc.
    double t_before = NAN, t_after = NAN;
    double t_star = NAN;
    cplx s_star{NAN, NAN};
    cplx e2u_star{NAN, NAN};
    cplx eigenvalue{NAN, NAN};
    double constant_alignment = NAN;
    int refine_iterations = 0;
};

struct RayResult {
    std::vector<RayPoint> path;     // accepted continuation points in order
    std::vector<RayPoint> samples;  // Newton solutions at the schedule parameters, per branch
    int branches = 1;
    FoldReport fold;
};

class StepUnderflowError : public ConvergenceError {
public:
    StepUnderflowError(const std::string& what, double lo, double hi) : ConvergenceError(what), t_lo(lo), t_hi(hi) {}
    double t_lo, t_hi;
};

// Pseudo-arclength continuation from u0 at params.front() until the parameter
// leaves [min, max] of the schedule. A fold requires both a turning point of t
// and a sign change of the real part of the eigenvalue nearest 0; it is then
// located by Newton on the minimally augmented system.
RayResult continue_ray(const ComplexMetric& h, const CubicPair& q, const ComplexField& u0, const RaySchedule& schedule);

json gauss_solution_to_json(const GaussSolution& sol, const json& field_refs = json::object());
json spectral_summary_to_json(const SpectralSummary& s);
json fold_to_json(const FoldReport& f);
std::string ray_csv(const RayResult& r);

} // namespace caslab
