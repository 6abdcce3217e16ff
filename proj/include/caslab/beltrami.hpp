#pragma once

#include "caslab/grid.hpp"

#include <vector>

namespace caslab {

// Transforms of densities supported inside the sampled rectangle, evaluated on
// the same nodes. The plane kernels are truncated beyond the rectangle diameter
// and applied as Fourier multipliers on a zero-padded grid.
//   C h(z) = -(1/pi) int h(t) / (t - z) dA(t),   d_zbar C h = h
//   T h    = d_z C h
ComplexField cauchy_transform(const ComplexField& h, int pad_factor = 4);
ComplexField beurling_transform(const ComplexField& h, int pad_factor = 4);

// Periodic Beurling transform: multiplier conj(k)/k on the half-integer shifted
// lattice of the domain's torus. An exact isometry of the discrete l2 norm.
ComplexField beurling_periodic(const ComplexField& h);

struct BeltramiOptions {
    int pad_factor = 4;
    double tol = 1e-12;
    int max_iter = 400;
    int support_margin = 2; // nodes next to the edge where mu must vanish
};

// Normalized solution f = z + C h of d_zbar f = mu d_z f, with h = d_zbar f.
struct QCMap {
    ComplexField f, f_z, f_zbar;
    int iterations = 0;
    double residual = 0;
    double contraction = 0; // last observed ratio of successive increments
    std::vector<double> increments;
};

QCMap solve_beltrami(const ComplexField& mu, const BeltramiOptions& opt = {});

// Local evaluation of f and its derivatives between nodes.
struct QCJet {
    cplx f, f_z, f_zbar;
};
QCJet evaluate(const QCMap& map, cplx z, int order = 8);

// Coefficient of the inverse map sampled on `target`, using Newton on f(z) = w.
ComplexField inverse_coefficient(const QCMap& map, const GridDomain& target);

// max |g(f(z)) - z| over the nodes whose image stays inside the grid.
double composition_defect(const QCMap& f, const QCMap& g);

// Smooth step: 1 for r <= r0, 0 for r >= r1.
double smooth_cutoff(double r, double r0, double r1);

// k (z / z̄) times the smooth cutoff; zero at the origin.
ComplexField radial_stretch_coefficient(const GridDomain& d, double k, double r0, double r1);

} // namespace caslab
